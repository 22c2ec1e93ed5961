//! Synthetic-image experiments: marginals, barycenter cost tensors, metrics
//! and free-support barycenter extraction.
//!
//! Randomness comes from ChaCha8 seeded with a `u64`, so every generated
//! image is bit-identical across platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::driver::solve_entropic;
use crate::error::{MotError, Result};
use crate::regmot::{check_simplex, EntropicModel, MotInstance};
use crate::report::{SolveReport, SolverKind};
use crate::rounding::{marginal_violation, round};
use crate::tensor::{DenseTensor, MultiIndexIter, Shape};

pub const DEFAULT_FG_FRACTION: f64 = 0.10;
pub const DEFAULT_MASS_THRESHOLD: f64 = 1e-10;
pub const FOREGROUND_MAX: f64 = 50.0;

/// Weighted points in `R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(MotError::Shape(format!("{} points but {} weights", points.len(), weights.len())));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(MotError::Domain("point weights must be nonnegative".into()));
        }
        Ok(PointCloud { points, weights })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `x,y,w` rows (first two coordinates) with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,w\n");
        for (p, w) in self.points.iter().zip(&self.weights) {
            let x = p.first().copied().unwrap_or(0.0);
            let y = p.get(1).copied().unwrap_or(0.0);
            out.push_str(&format!("{},{},{}\n", crate::report::fmt_f64(x), crate::report::fmt_f64(y), crate::report::fmt_f64(*w)));
        }
        out
    }
}

/// Barycentric weights `λ` on the simplex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        check_simplex(&lambda, "weight vector")?;
        Ok(WeightVector(lambda))
    }

    pub fn uniform(m: usize) -> Self {
        WeightVector(vec![1.0 / m as f64; m])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticImage {
    /// Normalized intensities, row-major over the `side × side` grid.
    pub marginal: Vec<f64>,
    /// Pixel `(i, j)` sits at `(i, j) / (side - 1)`.
    pub locations: Vec<Vec<f64>>,
    /// Top-left pixel `(row, col)` and side length of the foreground square.
    pub square: (usize, usize, usize),
}

/// Side of the foreground square: `round(side * sqrt(fraction))`, at least 1.
pub fn foreground_side(side: usize, fg_fraction: f64) -> usize {
    ((side as f64 * fg_fraction.sqrt()).round() as usize).clamp(1, side)
}

pub fn grid_locations(side: usize) -> Vec<Vec<f64>> {
    let h = (side - 1) as f64;
    (0..side * side).map(|p| vec![(p / side) as f64 / h, (p % side) as f64 / h]).collect()
}

fn image_from_rng(side: usize, fg_fraction: f64, rng: &mut ChaCha8Rng) -> SyntheticImage {
    let s = foreground_side(side, fg_fraction);
    let r0 = rng.gen_range(0..=side - s);
    let c0 = rng.gen_range(0..=side - s);
    // 1 - U[0,1) lies in (0, 1], so every pixel is strictly positive
    let mut marginal: Vec<f64> = (0..side * side)
        .map(|p| {
            let (i, j) = (p / side, p % side);
            let fg = (r0..r0 + s).contains(&i) && (c0..c0 + s).contains(&j);
            let u = 1.0 - rng.gen::<f64>();
            if fg {
                FOREGROUND_MAX * u
            } else {
                u
            }
        })
        .collect();
    let total: f64 = marginal.iter().sum();
    marginal.iter_mut().for_each(|x| *x /= total);
    SyntheticImage {
        marginal,
        locations: grid_locations(side),
        square: (r0, c0, s),
    }
}

/// Random image with a bright square covering about `fg_fraction` of the
/// pixels. Background pixels are uniform on `(0, 1]`, foreground pixels on
/// `(0, 50]`.
pub fn gen_synthetic_image(side: usize, fg_fraction: f64, seed: u64) -> Result<SyntheticImage> {
    gen_synthetic_images(side, fg_fraction, 1, seed).map(|mut v| v.remove(0))
}

/// `count` independent images; image `k` uses ChaCha8 stream `k` of `seed`,
/// so image 0 equals [`gen_synthetic_image`] with the same seed.
pub fn gen_synthetic_images(side: usize, fg_fraction: f64, count: usize, seed: u64) -> Result<Vec<SyntheticImage>> {
    if side < 2 {
        return Err(MotError::Domain(format!("image side must be at least 2, got {side}")));
    }
    if !(fg_fraction > 0.0 && fg_fraction <= 1.0) {
        return Err(MotError::Domain(format!("foreground fraction must lie in (0, 1], got {fg_fraction}")));
    }
    Ok((0..count)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            image_from_rng(side, fg_fraction, &mut rng)
        })
        .collect())
}

fn weighted_mean(points: &[&[f64]], lambda: &[f64]) -> Vec<f64> {
    let d = points[0].len();
    let mut a = vec![0.0; d];
    for (x, &l) in points.iter().zip(lambda) {
        for (ai, xi) in a.iter_mut().zip(x.iter()) {
            *ai += l * xi;
        }
    }
    a
}

/// `C_{i_1..i_m} = Σ_k (λ_k / 2) ||x^(k)_{i_k} - A||²` with `A = Σ_k λ_k x^(k)_{i_k}`.
pub fn barycenter_cost(locations: &[Vec<Vec<f64>>], lambda: &WeightVector) -> Result<DenseTensor<f64>> {
    let m = locations.len();
    if m == 0 || lambda.len() != m {
        return Err(MotError::Shape(format!("{m} point sets but {} weights", lambda.len())));
    }
    let n = locations[0].len();
    let d = locations[0].first().map_or(0, Vec::len);
    if locations.iter().any(|l| l.len() != n || l.iter().any(|p| p.len() != d)) {
        return Err(MotError::Shape("point sets must have equal size and dimension".into()));
    }
    let lam = lambda.as_slice();
    let shape = Shape::cubic(n, m)?;
    Ok(DenseTensor::from_fn(shape, |idx| {
        let pts: Vec<&[f64]> = idx.iter().enumerate().map(|(k, &i)| locations[k][i].as_slice()).collect();
        let a = weighted_mean(&pts, lam);
        pts.iter()
            .zip(lam)
            .map(|(x, &l)| 0.5 * l * x.iter().zip(&a).map(|(xi, ai)| (xi - ai) * (xi - ai)).sum::<f64>())
            .sum()
    }))
}

/// `d(X) = Σ_k ||r_k(X) - r_k||_1`.
pub fn metric_d(x: &DenseTensor<f64>, marginals: &[Vec<f64>]) -> Result<f64> {
    if marginals.len() != x.order() {
        return Err(MotError::Shape(format!("{} marginals for a {}-way plan", marginals.len(), x.order())));
    }
    marginal_violation(x, marginals)
}

/// `log(d1 / d2)`.
pub fn competitive_ratio(d1: f64, d2: f64) -> Result<f64> {
    if !(d1 > 0.0 && d2 > 0.0) {
        return Err(MotError::Domain(format!("competitive ratio needs positive inputs, got {d1} and {d2}")));
    }
    Ok((d1 / d2).ln())
}

/// One point `Σ_k λ_k x^(k)_{i_k}` per multi-index whose mass exceeds
/// `mass_threshold` times the total, weights renormalized, in row-major order.
pub fn extract_barycenter(
    plan: &DenseTensor<f64>,
    locations: &[Vec<Vec<f64>>],
    lambda: &WeightVector,
    mass_threshold: f64,
) -> Result<PointCloud> {
    let m = plan.order();
    if locations.len() != m || lambda.len() != m {
        return Err(MotError::Shape("need one point set and one weight per axis".into()));
    }
    for (k, l) in locations.iter().enumerate() {
        if l.len() != plan.shape().size(k) {
            return Err(MotError::Shape(format!("point set {k} does not match axis size")));
        }
    }
    if !plan.is_nonnegative() {
        return Err(MotError::Domain("plan must be nonnegative".into()));
    }
    let cut = mass_threshold * plan.sum();
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let mut it = MultiIndexIter::new(plan.shape());
    let mut flat = 0;
    loop {
        let w = plan.data()[flat];
        if w > cut && w > 0.0 {
            let pts: Vec<&[f64]> = it.current().iter().enumerate().map(|(k, &i)| locations[k][i].as_slice()).collect();
            points.push(weighted_mean(&pts, lambda.as_slice()));
            weights.push(w);
        }
        flat += 1;
        if !it.step() {
            break;
        }
    }
    if points.is_empty() {
        return Err(MotError::Domain("no plan entry exceeds the mass threshold".into()));
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    PointCloud::new(points, weights)
}

/// Bilinear binning of the first two coordinates onto a `g × g` grid of
/// nodes `(i, j) / (g - 1)` over `[0, 1]²`; points outside are clamped.
/// Row-major, total mass equals the cloud's.
pub fn rasterize(cloud: &PointCloud, g: usize) -> Result<Vec<f64>> {
    if g < 2 {
        return Err(MotError::Domain(format!("grid needs at least 2 nodes per side, got {g}")));
    }
    let h = (g - 1) as f64;
    let mut img = vec![0.0; g * g];
    let split = |t: f64| {
        let s = t.clamp(0.0, 1.0) * h;
        let i = (s.floor() as usize).min(g - 2);
        (i, s - i as f64)
    };
    for (p, &w) in cloud.points.iter().zip(&cloud.weights) {
        let (i, fx) = split(p.first().copied().unwrap_or(0.0));
        let (j, fy) = split(p.get(1).copied().unwrap_or(0.0));
        for (di, wi) in [(0, 1.0 - fx), (1, fx)] {
            for (dj, wj) in [(0, 1.0 - fy), (1, fy)] {
                let v = w * wi * wj;
                if v != 0.0 {
                    img[(i + di) * g + j + dj] += v;
                }
            }
        }
    }
    Ok(img)
}

/// Binary PGM scaled so the brightest pixel is 255.
pub fn to_pgm(img: &[f64], g: usize) -> Vec<u8> {
    let max = img.iter().copied().fold(0.0, f64::max);
    let mut out = format!("P5\n{g} {g}\n255\n").into_bytes();
    out.extend(img.iter().map(|&v| if max > 0.0 { (v / max * 255.0).round() as u8 } else { 0 }));
    out
}

/// `m` synthetic images on a `side × side` grid with the uniform-weight
/// barycenter cost over their common pixel locations.
pub fn synthetic_instance(side: usize, m: usize, seed: u64) -> Result<(MotInstance<f64>, Vec<Vec<Vec<f64>>>)> {
    let images = gen_synthetic_images(side, DEFAULT_FG_FRACTION, m, seed)?;
    let locations: Vec<Vec<Vec<f64>>> = images.iter().map(|im| im.locations.clone()).collect();
    let cost = barycenter_cost(&locations, &WeightVector::uniform(m))?;
    let inst = MotInstance::new(cost, images.into_iter().map(|im| im.marginal).collect())?;
    Ok((inst, locations))
}

/// Outcome of one solver run on a synthetic instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRun {
    pub seed: u64,
    pub solver: SolverKind,
    pub eta: f64,
    pub eps_prime: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_residue: f64,
    /// `d(X)` of the normalized plan at the output potentials.
    pub d: f64,
    #[serde(skip)]
    pub report: Option<SolveReport>,
}

/// Run one solver to `E_t <= eps_prime` on the synthetic instance for `seed`.
pub fn run_synthetic(
    side: usize,
    m: usize,
    seed: u64,
    eta: f64,
    eps_prime: f64,
    solver: SolverKind,
    max_iter: Option<usize>,
) -> Result<SyntheticRun> {
    let (inst, _) = synthetic_instance(side, m, seed)?;
    let out = solve_entropic(&inst, solver, eta, eps_prime, max_iter)?;
    let plan = EntropicModel::new(&inst, eta)?.plan(&out.beta)?;
    Ok(SyntheticRun {
        seed,
        solver,
        eta,
        eps_prime,
        iterations: out.report.iterations,
        converged: out.report.converged,
        final_residue: out.report.final_residue,
        d: metric_d(&plan, inst.marginals())?,
        report: Some(out.report),
    })
}

/// Free-support barycenter of the synthetic images for `seed`: solve, round
/// onto the input marginals, extract.
pub fn synthetic_barycenter(
    side: usize,
    m: usize,
    seed: u64,
    eta: f64,
    eps_prime: f64,
    solver: SolverKind,
    lambda: &WeightVector,
) -> Result<(PointCloud, SolveReport)> {
    let images = gen_synthetic_images(side, DEFAULT_FG_FRACTION, m, seed)?;
    let locations: Vec<Vec<Vec<f64>>> = images.iter().map(|im| im.locations.clone()).collect();
    let cost = barycenter_cost(&locations, lambda)?;
    let inst = MotInstance::new(cost, images.into_iter().map(|im| im.marginal).collect())?;
    let out = solve_entropic(&inst, solver, eta, eps_prime, None)?;
    let plan = EntropicModel::new(&inst, eta)?.plan(&out.beta)?;
    let (rounded, _) = round(&plan, inst.marginals())?;
    Ok((extract_barycenter(&rounded, &locations, lambda, DEFAULT_MASS_THRESHOLD)?, out.report))
}
