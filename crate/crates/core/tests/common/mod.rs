#![allow(dead_code)]

use leakage_rb::liouville::{dagger, trace, CMatrix, Channel, SpaceSpec, C64};
use leakage_rb::noise::haar_unitary;
use leakage_rb::rng::RandomStream;

/// Random CPTP channel with `rank` Kraus operators: blocks of the first `d`
/// columns of a Haar unitary on `d * rank`.
pub fn random_channel(space: SpaceSpec, rank: usize, rng: &mut RandomStream) -> Channel {
    let d = space.d();
    let u = haar_unitary(d * rank, rng);
    let kraus = (0..rank)
        .map(|i| u.view((i * d, 0), (d, d)).into_owned())
        .collect();
    Channel::new(space, kraus).unwrap()
}

/// Random channel scaled to be trace non-increasing with `Σ K†K = t I`.
pub fn random_lossy_channel(
    space: SpaceSpec,
    rank: usize,
    t: f64,
    rng: &mut RandomStream,
) -> Channel {
    let ch = random_channel(space, rank, rng);
    let kraus = ch.kraus().iter().map(|k| k.scale(t.sqrt())).collect();
    Channel::new(space, kraus).unwrap()
}

/// Random density matrix `G G† / Tr`.
pub fn random_state(d: usize, rng: &mut RandomStream) -> CMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| {
        C64::new(rng.standard_normal(), rng.standard_normal())
    });
    let rho = &g * dagger(&g);
    let tr = trace(&rho);
    rho / tr
}
