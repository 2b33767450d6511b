//! Spectral convergence of a standing acoustic mode in a closed box.

use rayon::prelude::*;

use super::{report_header, set_f, ValidationError};
use crate::assembly::Discretization;
use crate::material::{DomainKind, MaterialTable, WATER_ID};
use crate::mesh::{voxels_to_hexmesh, BoundaryKind, BoundaryPolicy, VoxelVolume};
use crate::solver::{compute_dt, Manifest, SolverRun, TimeGrid, DEFAULT_COURANT};

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceParams {
    pub degrees: Vec<usize>,
    /// Mode numbers (m, n, l) of cos(mπx/L)·cos(nπy/L)·cos(lπz/L).
    pub mode: [usize; 3],
    pub elements_per_side: usize,
    pub box_size: f64,
    pub material: u32,
    pub courant: f64,
    /// Mode periods simulated.
    pub periods: f64,
    /// Relative change of the error under dt halving beyond which a row is
    /// flagged as limited by time stepping or round-off.
    pub dt_sensitivity: f64,
}

impl Default for ConvergenceParams {
    fn default() -> Self {
        ConvergenceParams {
            degrees: vec![2, 4, 6],
            mode: [1, 1, 1],
            elements_per_side: 2,
            box_size: 0.01,
            material: WATER_ID,
            courant: DEFAULT_COURANT,
            periods: 10.0,
            dt_sensitivity: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub degree: usize,
    pub dt: f64,
    pub omega_exact: f64,
    /// Spatial eigenfrequency recovered from the discrete oscillation.
    pub omega_h: f64,
    pub rel_error: f64,
    /// Same measurement at dt/2.
    pub rel_error_half_dt: f64,
    /// The error moved by more than the allowed fraction under dt halving.
    pub dt_limited: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceStudy {
    /// Error ratios between consecutive rows.
    pub fn ratios(&self) -> Vec<f64> {
        self.rows.windows(2).map(|w| w[0].rel_error / w[1].rel_error).collect()
    }

    /// Each refinement gains at least `min_ratio`, except where the finer
    /// row has reached the time-stepping or round-off floor.
    pub fn passes(&self, min_ratio: f64) -> bool {
        self.rows.windows(2).all(|w| w[0].rel_error / w[1].rel_error >= min_ratio || w[1].dt_limited)
            && !self.rows.first().is_some_and(|r| r.dt_limited)
    }

    pub fn report(&self, config_hash: &str, min_ratio: f64) -> Manifest {
        let mut m = report_header("convergence", config_hash);
        for r in &self.rows {
            let k = format!("n{}", r.degree);
            set_f(&mut m, &format!("{k}.dt"), r.dt);
            set_f(&mut m, &format!("{k}.omega_exact"), r.omega_exact);
            set_f(&mut m, &format!("{k}.omega_h"), r.omega_h);
            set_f(&mut m, &format!("{k}.rel_error"), r.rel_error);
            set_f(&mut m, &format!("{k}.rel_error_half_dt"), r.rel_error_half_dt);
            m.set(&format!("{k}.dt_limited"), r.dt_limited);
        }
        for (w, ratio) in self.rows.windows(2).zip(self.ratios()) {
            set_f(&mut m, &format!("ratio.n{}_n{}", w[0].degree, w[1].degree), ratio);
        }
        set_f(&mut m, "min_ratio", min_ratio);
        m.set("pass", self.passes(min_ratio));
        m
    }
}

/// Discrete eigenfrequency from the modal coordinate of a free oscillation.
///
/// q_n = φ_nᵀ M φ_mode. A single mode obeys q_{n+1} + q_{n−1} = 2cos(Ωdt)·q_n
/// exactly under the explicit scheme, and the scheme maps the spatial
/// eigenfrequency ω_h to Ω with sin(Ωdt/2) = ω_h·dt/2. Other modes excited
/// by the interpolation error enter q_n only quadratically.
fn measure(disc: &Discretization, mode: &[f64], dt: f64, n_steps: usize) -> Result<f64, ValidationError> {
    let grid = TimeGrid::new(dt, n_steps as f64 * dt, 0.0)?;
    let mut state = disc.zero_fields();
    state.phi.copy_from_slice(mode);
    let mass = &disc.mass().fluid;
    let q_of = |phi: &[f64]| phi.iter().zip(mode).zip(mass).map(|((p, m), w)| p * m * w).sum::<f64>();
    let mut run = SolverRun::with_state(disc, grid, Vec::new(), Vec::new(), state);
    let mut q = Vec::with_capacity(n_steps + 1);
    q.push(q_of(&run.state.phi));
    while run.step < n_steps {
        run.step()?;
        q.push(q_of(&run.state.phi));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for n in 1..q.len() - 1 {
        num += q[n] * (q[n + 1] + q[n - 1]);
        den += 2.0 * q[n] * q[n];
    }
    let cos = num / den;
    // sin²(Ωdt/2) = (1 − cos Ωdt)/2.
    Ok((2.0 / dt) * (0.5 * (1.0 - cos)).max(0.0).sqrt())
}

/// Measures the relative frequency error of one standing mode for each
/// degree, at the CFL step and at half of it.
pub fn convergence_study(params: &ConvergenceParams, table: &MaterialTable) -> Result<ConvergenceStudy, ValidationError> {
    let mat = table.get(params.material)?;
    if mat.domain_kind() != DomainKind::Acoustic {
        return Err(ValidationError::Config("the standing-mode box must be a fluid".into()));
    }
    if params.mode == [0, 0, 0] || params.degrees.is_empty() || params.elements_per_side == 0 {
        return Err(ValidationError::Config("need a non-constant mode, some degrees and at least one element".into()));
    }
    let l = params.box_size;
    let ne = params.elements_per_side;
    let vol = VoxelVolume::uniform([ne; 3], [l / ne as f64; 3], params.material);
    let mesh = voxels_to_hexmesh(&vol, &BoundaryPolicy::all(BoundaryKind::Free))?;
    let k2: f64 = params.mode.iter().map(|&m| (m as f64 * std::f64::consts::PI / l).powi(2)).sum();
    let omega_exact = mat.vp * k2.sqrt();
    let period = 2.0 * std::f64::consts::PI / omega_exact;
    let rows: Result<Vec<ConvergenceRow>, ValidationError> = params
        .degrees
        .par_iter()
        .map(|&degree| {
            let disc = Discretization::build(&mesh, table, degree)?;
            let dt = compute_dt(&mesh, table, disc.rule(), params.courant)?;
            let dm = disc.dofmap();
            let mode: Vec<f64> = (0..dm.n_fluid())
                .map(|f| {
                    let x = dm.node(dm.fluid_node(f));
                    (0..3).map(|a| (params.mode[a] as f64 * std::f64::consts::PI * x[a] / l).cos()).product()
                })
                .collect();
            let steps = |dt: f64| (params.periods * period / dt).ceil() as usize;
            let omega_h = measure(&disc, &mode, dt, steps(dt))?;
            let omega_half = measure(&disc, &mode, 0.5 * dt, steps(0.5 * dt))?;
            let rel_error = (omega_h - omega_exact).abs() / omega_exact;
            let rel_error_half_dt = (omega_half - omega_exact).abs() / omega_exact;
            let dt_limited = (rel_error_half_dt - rel_error).abs() > params.dt_sensitivity * rel_error;
            Ok(ConvergenceRow { degree, dt, omega_exact, omega_h, rel_error, rel_error_half_dt, dt_limited })
        })
        .collect();
    Ok(ConvergenceStudy { rows: rows? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::builtin_dolphin_table;

    #[test]
    fn errors_fall_spectrally() {
        let study = convergence_study(&ConvergenceParams::default(), &builtin_dolphin_table()).unwrap();
        let r = study.ratios();
        assert!(r[0] >= 10.0, "{:?}", study.rows);
        assert!(r[1] >= 10.0 || study.rows[2].dt_limited, "{:?}", study.rows);
        assert!(!study.rows[0].dt_limited && !study.rows[1].dt_limited, "{:?}", study.rows);
        assert!(study.passes(10.0));
        let rep = study.report("x", 10.0);
        assert_eq!(rep.get("pass"), Some("true"));
        assert!(rep.get("ratio.n2_n4").is_some());
    }

    #[test]
    fn refining_dt_alone_leaves_the_error() {
        let p = ConvergenceParams { degrees: vec![3], ..ConvergenceParams::default() };
        let row = &convergence_study(&p, &builtin_dolphin_table()).unwrap().rows[0];
        assert!((row.rel_error_half_dt - row.rel_error).abs() <= 0.05 * row.rel_error, "{row:?}");
    }

    #[test]
    fn solid_box_is_rejected() {
        let p = ConvergenceParams { material: 4, ..ConvergenceParams::default() };
        assert!(matches!(convergence_study(&p, &builtin_dolphin_table()), Err(ValidationError::Config(_))));
    }
}
