use crate::spatial::SpatialFn;

/// `-ζ(1/2)/√(2π)`: mean overshoot of a Gaussian random walk over a level, in
/// units of the step standard deviation.
pub(crate) const MONITORING_SHIFT: f64 = 0.582_597_157_939_010_7;

/// Online accumulator for one additive functional along a path grid.
#[derive(Debug, Clone)]
pub(crate) struct Leaf {
    kind: LeafKind,
    last: f64,
    armed: bool,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub(crate) enum LeafKind {
    /// Trapezoid rule for `∫ f(X_s) ds`.
    Occupation(SpatialFn),
    /// Trapezoid rule for `(1/2ε) ∫ 1{|X_s - a| ≤ ε} ds`.
    Band { a: f64, eps: f64 },
    /// `2(ε + 2β√dt)` per completed downcrossing of `[a, a + ε]` seen on the
    /// grid; the `β√dt` shift of each level compensates for crossings the
    /// discrete monitoring misses.
    Down { a: f64, eps: f64 },
}

impl Leaf {
    pub fn new(kind: LeafKind) -> Self {
        Leaf {
            kind,
            last: 0.0,
            armed: false,
            value: 0.0,
        }
    }

    #[inline]
    fn rate(&self, x: f64) -> f64 {
        match &self.kind {
            LeafKind::Occupation(f) => f.eval(x),
            LeafKind::Band { a, eps } => {
                if (x - a).abs() <= *eps {
                    0.5 / eps
                } else {
                    0.0
                }
            }
            LeafKind::Down { .. } => 0.0,
        }
    }

    /// Resets the accumulator to zero with the path currently at `x`.
    pub fn start(&mut self, x: f64) {
        self.value = 0.0;
        self.last = self.rate(x);
        if let LeafKind::Down { a, eps } = self.kind {
            self.armed = x >= a + eps;
        }
    }

    /// Adds the step from the current state to `x` and returns the increment.
    #[inline]
    pub fn step(&mut self, x: f64, dt: f64) -> f64 {
        let inc = match self.kind {
            LeafKind::Down { a, eps } => {
                if self.armed && x <= a {
                    self.armed = false;
                    2.0 * (eps + 2.0 * MONITORING_SHIFT * dt.sqrt())
                } else {
                    if x >= a + eps {
                        self.armed = true;
                    }
                    0.0
                }
            }
            _ => {
                let r = self.rate(x);
                let inc = 0.5 * dt * (self.last + r);
                self.last = r;
                inc
            }
        };
        self.value += inc;
        inc
    }
}
