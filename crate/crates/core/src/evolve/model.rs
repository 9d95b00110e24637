use crate::qspace::{liouvillian, FockSpace, Operator, Superoperator};
use crate::{Error, Result, C64};

/// Hamiltonian plus weighted collapse operators.
#[derive(Clone, Debug)]
pub struct LindbladModel {
    space: FockSpace,
    h: Operator,
    collapses: Vec<(f64, Operator)>,
}

impl LindbladModel {
    /// Relative Hermiticity tolerance on `H`, scaled by its largest entry.
    pub const HERMITIAN_TOL: f64 = 1e-12;

    /// Build a model. `H` is checked for Hermiticity and then symmetrized so
    /// that it is Hermitian to the last bit.
    pub fn new(h: Operator, collapses: Vec<(f64, Operator)>) -> Result<Self> {
        let scale = h.matrix().max_abs().max(1.0);
        let dev = h.hermitian_deviation();
        if dev > Self::HERMITIAN_TOL * scale {
            return Err(Error::InvalidParams(format!(
                "Hamiltonian is not Hermitian (max |H - H†| = {dev:e})"
            )));
        }
        for (rate, c) in &collapses {
            if !(*rate >= 0.0) {
                return Err(Error::NegativeRate(*rate));
            }
            if c.space() != h.space() {
                return Err(Error::ShapeMismatch("collapse operator on a different space".into()));
            }
        }
        let half = C64::new(0.5, 0.0);
        let h = Operator::linear_combination(h.space(), &[(half, &h), (half, &h.dag())]);
        Ok(LindbladModel {
            space: h.space().clone(),
            h,
            collapses,
        })
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.h
    }

    pub fn collapses(&self) -> &[(f64, Operator)] {
        &self.collapses
    }

    pub fn liouvillian(&self) -> Superoperator {
        liouvillian(&self.h, &self.collapses).expect("model invariants checked on construction")
    }

    /// Same model with a different Hamiltonian.
    pub fn with_hamiltonian(&self, h: Operator) -> Result<Self> {
        Self::new(h, self.collapses.clone())
    }

    /// Index of the collapse channel whose operator equals `op`.
    pub fn find_channel(&self, op: &Operator) -> Option<usize> {
        self.collapses.iter().position(|(_, c)| c == op)
    }
}
