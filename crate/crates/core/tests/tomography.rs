use phasecorr::fock::loss_degraded_distribution;
use phasecorr::gaussian::{bin_phases, sample_dataset, DatasetMeta};
use phasecorr::tomography::{
    monte_carlo_errors, reconstruct_with_table, NumberPatternTable, DEFAULT_PHASE_BINS,
};
use phasecorr::{PhaseNoiseModel, PhaseSchedule, QuadratureDataset, Record, SqueezingSpec};

fn canonical() -> SqueezingSpec {
    SqueezingSpec::from_initial_db(7.4, 0.0, 0.6).unwrap()
}

#[test]
fn vacuum_reconstructs_to_the_ground_state() {
    let ds = sample_dataset(
        &SqueezingSpec::vacuum(),
        &PhaseNoiseModel::None,
        400_000,
        &PhaseSchedule::default(),
        3,
    )
    .unwrap();
    let table = NumberPatternTable::new(3).unwrap();
    let est =
        reconstruct_with_table(&bin_phases(&ds, DEFAULT_PHASE_BINS).unwrap(), &table).unwrap();
    assert!((est.rho.get(0, 0, 0, 0).re - 1.0).abs() < 0.02);
    assert!((est.rho.trace().re - 1.0).abs() < 0.02);
    let m = est.rho.matrix();
    for i in 1..m.nrows() {
        assert!(m[(i, i)].re.abs() < 0.02, "diagonal {i} = {}", m[(i, i)]);
    }
    assert!(est.rho.is_hermitian(1e-12));
}

#[test]
fn diagonal_is_invariant_under_whole_bin_phase_shifts() {
    let spec = canonical();
    let ds = sample_dataset(
        &spec,
        &PhaseNoiseModel::Uniform,
        90_000,
        &PhaseSchedule::default(),
        5,
    )
    .unwrap();
    let delta = std::f64::consts::TAU / DEFAULT_PHASE_BINS as f64;
    let shifted: Vec<Record> = ds
        .records()
        .iter()
        .map(|r| Record {
            phi_a: (r.phi_a + 7.0 * delta) % std::f64::consts::TAU,
            phi_b: (r.phi_b + 11.0 * delta) % std::f64::consts::TAU,
            ..*r
        })
        .collect();
    let shifted = QuadratureDataset::new(shifted, DatasetMeta::external(ds.len())).unwrap();
    let table = NumberPatternTable::new(4).unwrap();
    let a = reconstruct_with_table(&bin_phases(&ds, DEFAULT_PHASE_BINS).unwrap(), &table).unwrap();
    let b =
        reconstruct_with_table(&bin_phases(&shifted, DEFAULT_PHASE_BINS).unwrap(), &table).unwrap();
    for k in 0..4 {
        for m in 0..4 {
            let (x, y) = (a.rho.get(k, m, k, m).re, b.rho.get(k, m, k, m).re);
            assert!((x - y).abs() < 1e-12, "({k}, {m}): {x} vs {y}");
        }
    }
}

#[test]
fn monte_carlo_errors_shrink_as_inverse_root_n() {
    let spec = canonical();
    let d = 3;
    let small = monte_carlo_errors(&spec, &PhaseNoiseModel::Uniform, 20_000, 24, d, 11).unwrap();
    let large = monte_carlo_errors(&spec, &PhaseNoiseModel::Uniform, 80_000, 24, d, 12).unwrap();
    let mean = |t: &phasecorr::tomography::SigmaTable| {
        t.re_matrix().iter().sum::<f64>() / t.re_matrix().len() as f64
    };
    let ratio = mean(&small.sigma) / mean(&large.sigma);
    assert!((ratio / 2.0 - 1.0).abs() < 0.2, "σ ratio {ratio}");
    assert!(small.coherence_mean > large.coherence_mean);
}

#[test]
fn lossy_diagonal_matches_the_binomial_oracle() {
    let spec = canonical();
    let ds = sample_dataset(
        &spec,
        &PhaseNoiseModel::Uniform,
        600_000,
        &PhaseSchedule::default(),
        8,
    )
    .unwrap();
    let d = 4;
    let table = NumberPatternTable::new(d).unwrap();
    let est =
        reconstruct_with_table(&bin_phases(&ds, DEFAULT_PHASE_BINS).unwrap(), &table).unwrap();
    let oracle = loss_degraded_distribution(spec.mixture_ratio(), spec.eta, d).unwrap();
    for k in 0..d {
        for m in 0..d {
            let got = est.rho.get(k, m, k, m).re;
            assert!(
                (got - oracle[(k, m)]).abs() < 0.02,
                "({k}, {m}): {got} vs {}",
                oracle[(k, m)]
            );
        }
    }
}
