//! Norms, the trilinear form, the stability quotient `B(v)`, Hardy
//! quotients, the central-symmetry projector and the `delta*` search.

mod delta;
mod norms;
mod spectral;
mod stream;
mod velocity;

pub use delta::{
    analytic_criteria, estimate_delta_star, search_basis, search_grid, Certificate, CriterionValues,
    DeltaSearch, HypothesisReport, Verdict, Witness,
};
pub use norms::{
    h1_seminorm, hardy_quotient_central, hardy_quotient_log, hypothesis_ratio, hypothesis_ratio_velocity,
    l2_norm, trilinear, HARDY_COLLAR,
};
pub use spectral::{lagrange_diff_matrix, resolution_defect, trig_diff_matrices, SpectralOps};
pub use stream::{
    CentralProjected, LogRadius, ModalStream, Phase, PolarJet, Rescaled, SampledStream, Shape, StreamField,
    StreamFunction, StreamMode, Support, UniformFlow,
};
pub use velocity::{
    antipodal_defect, central_projector, divergence_residual, spectral_gradient, stream_to_velocity, Tail,
    VelocityFieldPolar, NYQUIST_TOLERANCE,
};

use std::sync::Arc;

use crate::error::Result;

/// Central projection of a stream function: the even part `(psi(x) + psi(-x))/2`.
pub fn central_projector_stream(psi: &StreamField) -> Result<StreamField> {
    match psi {
        StreamField::Analytic(f) => Ok(StreamField::Analytic(Arc::new(CentralProjected(f.clone())))),
        StreamField::Sampled(s) => {
            let g = &s.grid;
            let nt = g.n_theta();
            if nt % 2 != 0 {
                return Err(crate::error::invalid("central projection needs antipodally paired angles"));
            }
            let values = (0..g.len())
                .map(|k| {
                    let (i, j) = (k / nt, k % nt);
                    0.5 * (s.values[k] + s.values[g.index(i, g.antipode(j))])
                })
                .collect();
            Ok(StreamField::Sampled(SampledStream::new(g.clone(), values, s.support)?))
        }
    }
}
