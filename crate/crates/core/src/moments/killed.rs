//! Moments of `A_{t ∧ τ_D}`: the same formulas run on the part process.

use serde::{Deserialize, Serialize};

use super::{evaluate, MomentRequest, MomentResult};
use crate::error::{KacError, Result};
use crate::kernels::{KernelFamily, TransitionKernel};
use crate::measures::RevuzMeasure;
use crate::quadrature::QuadratureSpec;

/// The process killed on leaving the open interval `(lower, upper)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartProcess {
    pub lower: f64,
    pub upper: f64,
}

impl PartProcess {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
            return Err(KacError::Argument(format!("domain ({lower}, {upper}) must be a bounded interval")));
        }
        Ok(PartProcess { lower, upper })
    }

    /// Dirichlet kernel of the domain. Only Brownian motion and killed
    /// Brownian motion on a larger interval have one among the built-ins.
    pub fn kernel(&self, free: &TransitionKernel) -> Result<TransitionKernel> {
        match free.family() {
            KernelFamily::Brownian => {}
            KernelFamily::KilledBrownian { lower, upper } if lower <= self.lower && upper >= self.upper => {}
            _ => {
                return Err(KacError::Argument(format!(
                    "no part process of {} on ({}, {}) is available",
                    free.label(),
                    self.lower,
                    self.upper
                )))
            }
        }
        TransitionKernel::killed_brownian(self.lower, self.upper)
    }

    /// `μ|_D`; atoms on the boundary are rejected.
    pub fn measure(&self, mu: &RevuzMeasure) -> Result<RevuzMeasure> {
        mu.restricted(self.lower, self.upper)
    }

    /// The request rewritten for the part process, or `None` when some
    /// restricted measure vanishes (the moment is then zero).
    pub fn request(&self, req: &MomentRequest) -> Result<Option<MomentRequest>> {
        let kernel = self.kernel(&req.kernel)?;
        if !(req.x > self.lower && req.x < self.upper) {
            return Err(KacError::Domain(format!(
                "start point {} is outside ({}, {})",
                req.x, self.lower, self.upper
            )));
        }
        let mut measures = Vec::with_capacity(req.measures.len());
        for mu in &req.measures {
            let r = self.measure(mu)?;
            if r.is_empty() {
                return Ok(None);
            }
            measures.push(r);
        }
        Ok(Some(MomentRequest {
            kernel,
            measures,
            ..req.clone()
        }))
    }
}

/// Runs the request's formula on the part process. The terminal function is
/// read on `D`, and its cemetery value stands for the exterior constant.
pub fn killed_variant(req: &MomentRequest, domain: &PartProcess, quad: &QuadratureSpec) -> Result<MomentResult> {
    match domain.request(req)? {
        Some(r) => {
            let mut out = evaluate(&r, quad)?;
            out.provenance.operation = format!("killed-{}", out.provenance.operation);
            Ok(out)
        }
        None => {
            let kernel = domain.kernel(&req.kernel)?;
            let shifted = MomentRequest { kernel, ..req.clone() };
            Ok(super::MomentResult::zero("killed", &shifted, quad))
        }
    }
}
