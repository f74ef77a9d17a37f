use super::*;
use crate::autograd::Graph;
use crate::model::ModelVariant;
use crate::testutil::{parity_dataset, random_store, small_model};

fn cfg(epochs: usize, lr: f64) -> TrainConfig {
    TrainConfig { batch_size: 4, lr, epochs, seed: 3, val_fraction: 0.25, ..TrainConfig::default() }
}

#[test]
fn uniform_logits_cost_ln_c() {
    let g = Graph::new();
    let spec = TaskId::Direction.spec();
    let x = g.constant(Tensor::zeros(&[3, 5]));
    let labels = [Label::Class(0), Label::Class(4), Label::Class(2)];
    let l = loss_for_task(&spec, x, &labels).unwrap();
    assert!((l.value().item() - 5f64.ln()).abs() < 1e-12);
    let bad = [Label::Class(5), Label::Class(0), Label::Class(0)];
    assert!(loss_for_task(&spec, x, &bad).is_err());
}

#[test]
fn regression_loss_is_mean_squared_error() {
    let g = Graph::new();
    let spec = TaskId::Ttc.spec();
    let x = g.constant(Tensor::new(vec![2], vec![1.0, 2.0]));
    let l = loss_for_task(&spec, x, &[Label::Seconds(0.0), Label::Seconds(3.0)]).unwrap();
    assert!((l.value().item() - 1.0).abs() < 1e-12);
    let half = loss_for_task(&spec, x, &[Label::Seconds(1.0), Label::Seconds(3.0)]).unwrap();
    assert!((half.value().item() - 0.5).abs() < 1e-12);
    assert!(loss_for_task(&spec, x, &[Label::Seconds(1.0)]).is_err());
}

#[test]
fn validation_split_holds_out_whole_videos() {
    let d = parity_dataset(TaskId::Direction, 0..10, 10..12);
    let (fit, val) = validation_split(&d.train, 0.1, 7);
    let held: Vec<&str> = val.iter().map(|s| s.video_id.as_str()).collect();
    assert_eq!(val.len(), 2);
    assert!(fit.iter().all(|s| !held.contains(&s.video_id.as_str())));
    assert_eq!(validation_split(&d.train, 0.1, 7), (fit, val));
}

#[test]
fn zero_lr_leaves_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let store = random_store(dir.path(), 6, 45);
    let d = parity_dataset(TaskId::Direction, 0..4, 4..6);
    let model = small_model(ModelVariant::Vidnext, &[TaskId::Direction], 1);
    let out = train_task(model.clone(), &d, &store, cfg(1, 0.0)).unwrap();
    assert_eq!(out.last.model.params, model.params);
}

#[test]
fn heads_only_freezes_the_backbone() {
    let dir = tempfile::tempdir().unwrap();
    let store = random_store(dir.path(), 6, 45);
    let d = parity_dataset(TaskId::Direction, 0..4, 4..6);
    let model = small_model(ModelVariant::Vidnext, &[TaskId::Direction], 1);
    let c = TrainConfig { scope: TrainScope::HeadsOnly, ..cfg(2, 1e-2) };
    let out = train_task(model.clone(), &d, &store, c).unwrap();
    let mut changed = 0;
    for (name, t) in model.params.iter() {
        let after = out.last.model.params.get(name).unwrap();
        if VidNeXt::is_head_param(name) {
            changed += usize::from(after != t);
        } else {
            assert_eq!(after, t, "{name}");
        }
    }
    assert!(changed > 0);
}

#[test]
fn training_is_deterministic_and_resumable() {
    let dir = tempfile::tempdir().unwrap();
    let store = random_store(dir.path(), 8, 45);
    let d = parity_dataset(TaskId::Ttc, 0..6, 6..8);
    let model = small_model(ModelVariant::Vidnext, &[TaskId::Ttc], 4);
    let straight = train_task(model.clone(), &d, &store, cfg(3, 1e-3)).unwrap();
    let again = train_task(model.clone(), &d, &store, cfg(3, 1e-3)).unwrap();
    assert_eq!(straight.log, again.log);
    assert_eq!(straight.last.model.params, again.last.model.params);

    let mut t = Trainer::new(model, std::slice::from_ref(&d), &store, cfg(3, 1e-3)).unwrap();
    t.run_epoch().unwrap();
    t.state.save(&dir.path().join("ckpt")).unwrap();
    let state = Checkpoint::load(&dir.path().join("ckpt")).unwrap();
    assert_eq!(state, t.state);
    let resumed = Trainer::resume(state, std::slice::from_ref(&d), &store).unwrap().run().unwrap();
    assert_eq!(resumed.last.model.params, straight.last.model.params);
    assert_eq!(resumed.log[..], straight.log[2..]);
}

#[test]
fn multi_task_sums_one_loss_per_task() {
    let dir = tempfile::tempdir().unwrap();
    let store = random_store(dir.path(), 6, 45);
    let a = parity_dataset(TaskId::Direction, 0..4, 4..6);
    let b = parity_dataset(TaskId::Ttc, 0..4, 4..6);
    let model = small_model(ModelVariant::Vidnext, &[TaskId::Direction, TaskId::Ttc], 2);
    let out = multi_task_train(model, &[a.clone(), b.clone()], &store, cfg(1, 1e-3)).unwrap();
    let tasks: Vec<&str> = out.log.iter().filter(|r| r.split == "train").map(|r| r.task.as_str()).collect();
    assert_eq!(tasks, ["direction", "ttc"]);

    let single = small_model(ModelVariant::Vidnext, &[TaskId::Direction], 2);
    assert!(multi_task_train(single, &[a, b], &store, cfg(1, 1e-3)).is_err());
}

#[test]
fn missing_clip_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let store = random_store(dir.path(), 2, 45);
    let d = parity_dataset(TaskId::Direction, 0..4, 4..6);
    let model = small_model(ModelVariant::Vidnext, &[TaskId::Direction], 1);
    let err = train_task(model, &d, &store, cfg(1, 1e-3)).err().unwrap();
    assert!(matches!(err, Error::Missing(ref m) if m.contains("v2")), "{err}");
}

#[test]
fn divergence_aborts_with_context() {
    let dir = tempfile::tempdir().unwrap();
    let store = random_store(dir.path(), 6, 45);
    let d = parity_dataset(TaskId::Ttc, 0..4, 4..6);
    let mut model = small_model(ModelVariant::Vidnext, &[TaskId::Ttc], 1);
    for (name, t) in model.params.iter_mut() {
        if name.starts_with("heads.") {
            t.data_mut().iter_mut().for_each(|x| *x = f64::NAN);
        }
    }
    let err = train_task(model, &d, &store, cfg(1, 1e-3)).err().unwrap();
    let msg = err.to_string();
    assert!(matches!(err, Error::Numerical(_)) && msg.contains("epoch 0") && msg.contains("batch 0"), "{msg}");
}
