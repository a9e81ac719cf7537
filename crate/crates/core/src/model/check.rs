use crate::error::Result;
use crate::numerics::finite_difference_gradient;

use super::transformer::LanguageModel;
use super::vocab::TokenSequence;

/// Magnitude below which gradient entries are compared absolutely.
pub const GRADCHECK_FLOOR: f64 = 1e-6;

/// Largest elementwise `|analytic − numeric| / max(|analytic|, |numeric|, floor)`
/// over every parameter of `model`, using central differences with step `h`
/// on the batch loss.
pub fn gradient_check(model: &LanguageModel, batch: &[TokenSequence], h: f64) -> Result<f64> {
    let refs: Vec<&TokenSequence> = batch.iter().collect();
    let (mut graph, loss, leaves) = model.batch_loss_graph(&refs)?;
    graph.backward(loss)?;
    let mut worst = 0.0f64;
    let mut probe = model.clone();
    for (name, var) in leaves {
        let analytic = graph.grad(var).map(<[f64]>::to_vec);
        let base = model.params().get(&name).expect("leaf of a parameter").clone();
        let analytic = analytic.unwrap_or_else(|| vec![0.0; base.len()]);
        let numeric = finite_difference_gradient(
            |x| {
                *probe.params_mut().get_mut(&name).expect("present") = x.clone();
                let (g, l, _) = probe.batch_loss_graph(&refs).expect("same batch as above");
                g.value(l).values()[0]
            },
            &base,
            h,
        );
        *probe.params_mut().get_mut(&name).expect("present") = base;
        for (a, n) in analytic.iter().zip(numeric.values()) {
            let scale = a.abs().max(n.abs()).max(GRADCHECK_FLOOR);
            worst = worst.max((a - n).abs() / scale);
        }
    }
    Ok(worst)
}
