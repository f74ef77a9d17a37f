//! Build the three architectures at the tiny preset and run one clip batch
//! through each: parameter counts, output shapes and the de-stationary
//! factors.
//!
//! cargo run --release --example model_variants

use cyclist_collision::model::{ModelVariant, VidNeXt, VidNeXtConfig};
use cyclist_collision::tasks::TaskId;
use cyclist_collision::tensor::Tensor;

fn main() -> cyclist_collision::Result<()> {
    for variant in [ModelVariant::Vidnext, ModelVariant::ConvnextVt, ModelVariant::ResnetNst] {
        let config = VidNeXtConfig::tiny(variant, TaskId::Direction).with_all_heads();
        let s = config.image_size;
        let model = VidNeXt::new(config, 0)?;
        let frames = Tensor::from_fn(&[2, 30, s, s, 3], |i| ((i % 97) as f64 / 48.0) - 1.0);
        let start = std::time::Instant::now();
        let out = model.infer(&frames)?;
        let n_params: usize = model.params.iter().map(|(_, p)| p.len()).sum();
        println!("{variant:?}: {n_params} parameters, representation {:?}, {:.2?} per batch", out.y.shape(), start.elapsed());
        for (task, o) in &out.outputs {
            println!("  {:>16}: {:?}", task.slug(), o.shape());
        }
        match (&out.tau, &out.delta) {
            (Some(tau), Some(delta)) => println!("  tau {:.4?}, delta shape {:?}", tau.data(), delta.shape()),
            _ => println!("  vanilla attention: no tau or delta"),
        }
    }
    Ok(())
}
