//! SHA-256 fingerprints of configurations and of the quantity a result
//! estimates, so engine and simulation outputs can be matched up.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::kernels::TransitionKernel;
use crate::measures::RevuzMeasure;
use crate::moments::Terminal;

/// Hex SHA-256 of the value's JSON serialization.
pub fn sha256_json<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("serializable value");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Serialize)]
struct Target<'a> {
    kernel: &'a TransitionKernel,
    factors: Vec<String>,
    terminal: &'a Terminal,
    x: f64,
    t: f64,
}

/// Identifies `E_x[f(X_t) ∏ Aᵢ_t]` independently of factor order.
pub fn target_digest(
    kernel: &TransitionKernel,
    factors: &[RevuzMeasure],
    terminal: Option<&Terminal>,
    x: f64,
    t: f64,
) -> String {
    let mut keys: Vec<String> = factors
        .iter()
        .map(|m| serde_json::to_string(m).expect("serializable measure"))
        .collect();
    keys.sort();
    let default = Terminal::default();
    sha256_json(&Target {
        kernel,
        factors: keys,
        terminal: terminal.unwrap_or(&default),
        x,
        t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::SpatialFn;

    #[test]
    fn factor_order_does_not_matter() {
        let k = TransitionKernel::brownian();
        let a = RevuzMeasure::dirac(0.0);
        let b = RevuzMeasure::with_density(SpatialFn::indicator(0.0, 1.0));
        let d1 = target_digest(&k, &[a.clone(), b.clone()], None, 0.0, 1.0);
        let d2 = target_digest(&k, &[b, a.clone()], Some(&Terminal::default()), 0.0, 1.0);
        assert_eq!(d1, d2);
        assert_ne!(d1, target_digest(&k, &[a], None, 0.0, 1.0));
        assert_eq!(d1.len(), 64);
    }
}
