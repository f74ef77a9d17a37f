//! Stationarize a drifting series, then compare de-stationary attention
//! with plain attention on the normalized inputs. With tau = 1 and
//! delta = 0 the two coincide.
//!
//! cargo run --release --example destationary_attention

use cyclist_collision::autograd::Graph;
use cyclist_collision::model::{denormalize, destationary_attention, stationarize};
use cyclist_collision::tensor::Tensor;

fn main() -> cyclist_collision::Result<()> {
    let (t, d) = (6, 4);
    // Each feature has its own offset, scale and trend.
    let x = Tensor::from_fn(&[1, t, d], |i| {
        let (step, f) = ((i / d) as f64, (i % d) as f64);
        10.0 * f + (1.0 + f) * step + (step * (f + 1.0)).sin()
    });
    let g = Graph::new();
    let xv = g.constant(x.clone());
    let s = stationarize(xv, 1e-5);
    println!("mu    {:.3?}", s.mu.value().data());
    println!("sigma {:.3?}", s.sigma.value().data());
    let back = denormalize(s.x_prime, s.mu, s.sigma).value().max_abs_diff(&x);
    println!("denormalize(stationarize(x)) error {back:.1e}");

    let q = s.x_prime.reshape(&[1, 1, t, d]);
    let (plain, _) = destationary_attention(q, q, q, None, None)?;
    let unit = g.constant(Tensor::full(&[1, 1], 1.0));
    let zero = g.constant(Tensor::zeros(&[1, t]));
    let (reduced, _) = destationary_attention(q, q, q, Some(unit), Some(zero))?;
    println!("tau = 1, delta = 0 vs plain: max diff {:.1e}", reduced.value().max_abs_diff(&plain.value()));

    // Put back the scale removed by stationarization: tau = mean sigma^2,
    // delta = key-wise shift from the removed mean.
    let sig = s.sigma.value().clone();
    let tau = sig.data().iter().map(|v| v * v).sum::<f64>() / d as f64;
    let delta = Tensor::from_fn(&[1, t], |j| 0.1 * j as f64);
    let (_, weights) =
        destationary_attention(q, q, q, Some(g.constant(Tensor::full(&[1, 1], tau))), Some(g.constant(delta)))?;
    let (_, flat) = destationary_attention(q, q, q, None, None)?;
    println!("tau = {tau:.2}: attention row 0 {:.3?}", &weights.value().data()[..t]);
    println!("plain:       attention row 0 {:.3?}", &flat.value().data()[..t]);
    Ok(())
}
