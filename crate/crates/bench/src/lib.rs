//! Fixtures shared by the criterion benches.

use std::f64::consts::PI;
use std::sync::Arc;

use exflow::evolution::{assemble_system, BasisSpec, GalerkinBasis, GalerkinSystem};
use exflow::functionals::{stream_to_velocity, ModalStream, StreamField, VelocityFieldPolar};
use exflow::geometry::{PolarGrid, Stretch};
use exflow::steady_flows::SteadyFlowParams;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Flux carrier `Phi = pi` on a basis with `m_max` angular and `n` radial modes.
pub fn flux_system(r_max: f64, m_max: u32, n: usize) -> GalerkinSystem {
    let basis = Arc::new(GalerkinBasis::new(BasisSpec::new(r_max, m_max, n)).expect("valid basis"));
    assemble_system(basis, SteadyFlowParams::flux_carrier(PI)).expect("assembles")
}

pub fn random_stream(seed: u64, outer: f64) -> StreamField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    StreamField::analytic(ModalStream::random(&mut rng, 1.0, outer, 3, 3, false))
}

pub fn sample_field(seed: u64) -> VelocityFieldPolar {
    let grid = PolarGrid::annulus(1.0, 8.0, 32, 8, 32, Stretch::Geometric).expect("valid grid");
    stream_to_velocity(&random_stream(seed, 8.0), &grid).expect("resolved")
}
