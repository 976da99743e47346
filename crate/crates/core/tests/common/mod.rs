#![allow(dead_code)]

use nh_stab::{c64, ComplexSquareMatrix, DensityMatrix, HermitianMatrix, NHHamiltonian, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex(rng: &mut impl Rng, dim: usize, scale: f64) -> ComplexSquareMatrix {
    let entries: Vec<C64> = (0..dim * dim)
        .map(|_| {
            c64(
                rng.random_range(-scale..scale),
                rng.random_range(-scale..scale),
            )
        })
        .collect();
    ComplexSquareMatrix::from_row_major(dim, &entries).unwrap()
}

pub fn random_hermitian(rng: &mut impl Rng, dim: usize, scale: f64) -> HermitianMatrix {
    HermitianMatrix::hermitian_part(&random_complex(rng, dim, scale))
}

pub fn random_vector(rng: &mut impl Rng, dim: usize) -> Vec<C64> {
    (0..dim)
        .map(|_| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

pub fn random_pure(rng: &mut impl Rng, dim: usize) -> DensityMatrix {
    loop {
        let v = random_vector(rng, dim);
        if v.iter().map(|z| z.norm_sqr()).sum::<f64>() > 1e-3 {
            return DensityMatrix::pure(&v).unwrap();
        }
    }
}

/// Mixture `Σ wᵢ |ψᵢ⟩⟨ψᵢ|` of `dim` random pure states.
pub fn random_mixed(rng: &mut impl Rng, dim: usize) -> DensityMatrix {
    let weights: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut acc = ComplexSquareMatrix::zeros(dim);
    for w in weights {
        let p = random_pure(rng, dim);
        acc = &acc + &p.scale_real(w / total);
    }
    DensityMatrix::new(acc).unwrap()
}

pub fn random_hamiltonian(rng: &mut impl Rng, dim: usize, gamma_scale: f64) -> NHHamiltonian {
    let hp = random_hermitian(rng, dim, 1.0);
    let g = random_hermitian(rng, dim, gamma_scale);
    NHHamiltonian::new(hp, g, 1.0).unwrap()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

/// Right eigenpairs of the non-Hermitian matrix `H₊ − iΓ`.
pub fn right_eigenpairs(h: &NHHamiltonian) -> Vec<(C64, Vec<C64>)> {
    let m = h.matrix().into_matrix();
    let n = m.nrows();
    let eig = m.clone().schur().eigenvalues().expect("complex Schur form is triangular");
    eig.iter()
        .map(|&e| {
            let shifted = &m - nalgebra::DMatrix::<C64>::identity(n, n) * e;
            let svd = shifted.svd(false, true);
            let v_t = svd.v_t.unwrap();
            let k = (0..n)
                .min_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]))
                .unwrap();
            let v: Vec<C64> = v_t.row(k).iter().map(|z| z.conj()).collect();
            (e, v)
        })
        .collect()
}

/// `ψψ† + ε φφ†` normalized to unit trace.
pub fn pure_plus_mixing(psi: &[C64], phi: &[C64], eps: f64) -> DensityMatrix {
    let a = DensityMatrix::pure(psi).unwrap();
    let b = DensityMatrix::pure(phi).unwrap();
    let sum = &*a + &b.scale_real(eps);
    DensityMatrix::new(sum.scale_real(1.0 / (1.0 + eps))).unwrap()
}

/// Pairs each expected value with the closest unused actual value and
/// returns the largest distance.
pub fn spectrum_distance(expected: &[C64], actual: &[C64]) -> f64 {
    assert_eq!(expected.len(), actual.len());
    let mut used = vec![false; actual.len()];
    let mut worst: f64 = 0.0;
    for e in expected {
        let (idx, d) = actual
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, a)| (i, (a - e).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        used[idx] = true;
        worst = worst.max(d);
    }
    worst
}

/// Least-squares slope of `y` against `x`.
pub fn linear_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

pub struct RateExperiment {
    pub predicted: f64,
    pub observed: f64,
    pub gap: f64,
}

/// Predicted versus simulated decay rate of `S_L` around a stationary pure
/// state of a random three-level model.
///
/// The reference is the right eigenvector of `H` with the largest imaginary
/// eigenvalue, which is a fixed point of the normalized dynamics. A small
/// incoherent admixture is evolved with the full nonlinear equation and the
/// late-time slope of `ln S_L` is compared with the leading eigenvalue of
/// the characteristic matrix. Returns `None` when the leading eigenvalue is
/// complex or poorly separated.
pub fn dim3_rate_experiment(seed: u64) -> Option<RateExperiment> {
    use nh_stab::{analyze, evolve, EvolutionConfig, PureReference};

    let mut r = rng(seed);
    let h = random_hamiltonian(&mut r, 3, 0.5);
    let pairs = right_eigenpairs(&h);
    let (_, psi) = pairs
        .iter()
        .max_by(|a, b| a.0.im.total_cmp(&b.0.im))
        .unwrap()
        .clone();
    let reference = PureReference::for_hamiltonian(DensityMatrix::pure(&psi).unwrap(), &h).ok()?;
    let report = analyze(&h, &reference).ok()?;
    let top = report.eigenvalues[0];
    if top.im.abs() > 1e-9 {
        return None;
    }
    let second = report
        .eigenvalues
        .iter()
        .map(|z| z.re)
        .filter(|re| *re < top.re - 1e-9)
        .fold(f64::NEG_INFINITY, f64::max);
    let gap = top.re - second;
    if !(gap > 0.3 && top.re < -0.2 && top.re > -3.0) {
        return None;
    }

    let phi = random_vector(&mut r, 3);
    let rho0 = pure_plus_mixing(&psi, &phi, 1e-3);
    let t1 = 10.0 / gap;
    let t2 = t1 + 3.0 / top.re.abs();
    let cfg = EvolutionConfig {
        t_end: t2,
        dt: 1e-3,
        record_stride: 10,
        ..EvolutionConfig::default()
    };
    let traj = evolve(&h, &rho0, &cfg).ok()?;
    if !traj.termination.is_completed() || *traj.linear_entropy.last()? < 1e-9 {
        return None;
    }
    let (ts, ls): (Vec<f64>, Vec<f64>) = traj
        .times
        .iter()
        .zip(&traj.linear_entropy)
        .filter(|(t, _)| **t >= t1)
        .map(|(t, s)| (*t, s.ln()))
        .unzip();
    Some(RateExperiment {
        predicted: top.re,
        observed: linear_slope(&ts, &ls),
        gap,
    })
}
