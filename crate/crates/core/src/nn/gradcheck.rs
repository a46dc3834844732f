use super::network::{cross_entropy, Mlp};
use crate::data::Dataset;
use crate::error::Result;
use crate::par::Exec;

/// Denominator floor for the relative error, so parameters whose true
/// gradient is ~0 are judged on absolute error instead.
pub const REL_ERROR_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    /// max over parameters of `|a − n| / max(|a| + |n|, REL_ERROR_FLOOR)`
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub parameters: usize,
    /// Smallest `|g|` over layers whose activation has a kink; `+∞` when
    /// there are none. Central differences are unreliable when this is
    /// below a few `epsilon`.
    pub min_kink_distance: f64,
}

pub fn grad_check(mlp: &Mlp, data: &Dataset, epsilon: f64) -> Result<GradCheckReport> {
    grad_check_with(mlp, data, epsilon, Exec::default())
}

/// Compares `backward` against central differences of the mean
/// cross-entropy over every weight and bias.
pub fn grad_check_with(mlp: &Mlp, data: &Dataset, epsilon: f64, exec: Exec) -> Result<GradCheckReport> {
    let trace = mlp.forward(&data.inputs)?;
    let analytic = mlp.backward(&trace, &data.labels)?;
    let min_kink_distance = mlp
        .layers()
        .iter()
        .zip(&trace.pre_activations)
        .take(mlp.depth() - 1)
        .filter(|(l, _)| l.activation.has_kink())
        .flat_map(|(_, g)| g.as_slice().iter().map(|v| v.abs()))
        .fold(f64::INFINITY, f64::min);

    // Flat parameter addressing: (layer, offset) with biases after weights.
    let mut index = Vec::new();
    for (li, layer) in mlp.layers().iter().enumerate() {
        let nw = layer.fan_in() * layer.fan_out();
        for k in 0..nw + layer.fan_out() {
            index.push((li, k));
        }
    }
    let loss = |m: &Mlp| -> Result<f64> {
        let t = m.forward(&data.inputs)?;
        Ok(cross_entropy(t.output(), &data.labels)?.nats)
    };
    let chunks = exec.map_chunks(index.len(), 64, |range| -> Result<(f64, f64)> {
        let mut probe = mlp.clone();
        let mut worst = (0.0f64, 0.0f64);
        for &(li, k) in &index[range] {
            let nw = mlp.layers()[li].weights.as_slice().len();
            let original = *param_mut(&mut probe, li, k, nw);
            *param_mut(&mut probe, li, k, nw) = original + epsilon;
            let plus = loss(&probe)?;
            *param_mut(&mut probe, li, k, nw) = original - epsilon;
            let minus = loss(&probe)?;
            *param_mut(&mut probe, li, k, nw) = original;
            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = if k < nw {
                analytic[li].weights.as_slice()[k]
            } else {
                analytic[li].biases[k - nw]
            };
            let abs = (a - numeric).abs();
            let rel = abs / (a.abs() + numeric.abs()).max(REL_ERROR_FLOOR);
            worst.0 = worst.0.max(rel);
            worst.1 = worst.1.max(abs);
        }
        Ok(worst)
    });
    let mut max_rel_error = 0.0f64;
    let mut max_abs_error = 0.0f64;
    for c in chunks {
        let (r, a) = c?;
        max_rel_error = max_rel_error.max(r);
        max_abs_error = max_abs_error.max(a);
    }
    Ok(GradCheckReport {
        max_rel_error,
        max_abs_error,
        parameters: index.len(),
        min_kink_distance,
    })
}

fn param_mut(m: &mut Mlp, layer: usize, k: usize, weight_count: usize) -> &mut f64 {
    let layer = &mut m.layers_mut()[layer];
    if k < weight_count {
        &mut layer.weights.as_mut_slice()[k]
    } else {
        &mut layer.biases[k - weight_count]
    }
}
