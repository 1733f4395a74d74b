//! Dense primal-dual interior-point solver for small complex Hermitian SDPs
//! of the form
//!
//! ```text
//! minimize    tr(C X)
//! subject to  tr(G_j X) >= h_j     j = 1..m
//!             X_kk = 1             (optional)
//!             X ⪰ 0
//! ```
//!
//! The complex problem is solved through its real symmetric embedding
//! `Y = [[Re X, −Im X], [Im X, Re X]]`, with both real copies of each
//! diagonal entry pinned and the two diagonal blocks averaged on the way back.
//! Inequalities carry non-negative slacks. Directions are HKM with a Mehrotra
//! predictor-corrector; the Schur complement is dense and small.
//!
//! Internally `C` and every inequality row are normalized to unit Frobenius
//! norm. Residuals and inequality slacks reported by this module are in those
//! normalized units.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eig_min_hermitian, hermitian_part, is_finite_mat, is_hermitian, trace_inner, CMatrix, C64};

pub const MAX_DIMENSION: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub c: CMatrix,
    /// `(G_j, h_j)` meaning `tr(G_j X) >= h_j`.
    pub ineq: Vec<(CMatrix, f64)>,
    /// Pin every diagonal entry of `X` to one.
    pub diag_one: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdpOptions {
    pub max_iters: usize,
    /// Relative duality gap target.
    pub gap_tol: f64,
    /// Primal and dual residual target.
    pub feas_tol: f64,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self { max_iters: 100, gap_tol: 1e-7, feas_tol: 1e-7, step_fraction: 0.98 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdpStatus {
    Optimal,
    MaxIters,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub x: CMatrix,
    /// `tr(C X)`.
    pub objective: f64,
    pub dual_objective: f64,
    /// `|p − d| / (1 + |p| + |d|)` in normalized units.
    pub duality_gap: f64,
    /// Largest absolute primal constraint residual (normalized rows).
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub status: SdpStatus,
}

/// Compact solver summary for reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdpDiagnostics {
    pub status: SdpStatus,
    pub iterations: usize,
    pub objective: f64,
    pub duality_gap: f64,
    pub primal_residual: f64,
}

impl From<&SdpSolution> for SdpDiagnostics {
    fn from(s: &SdpSolution) -> Self {
        Self {
            status: s.status,
            iterations: s.iterations,
            objective: s.objective,
            duality_gap: s.duality_gap,
            primal_residual: s.primal_residual,
        }
    }
}

impl SdpProblem {
    pub fn dim(&self) -> usize {
        self.c.nrows()
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 || n > MAX_DIMENSION {
            return Err(Error::invalid(format!("SDP dimension {n} outside 1..={MAX_DIMENSION}")));
        }
        let mats = std::iter::once(&self.c).chain(self.ineq.iter().map(|(g, _)| g));
        for (k, a) in mats.enumerate() {
            if a.shape() != (n, n) {
                return Err(Error::DimensionMismatch(format!("SDP matrix {k} is {:?}, expected {n}x{n}", a.shape())));
            }
            if !is_finite_mat(a) || !is_hermitian(a, 1e-10) {
                return Err(Error::invalid(format!("SDP matrix {k} is not a finite Hermitian matrix")));
            }
        }
        if self.ineq.iter().any(|(_, h)| !h.is_finite()) {
            return Err(Error::invalid("non-finite inequality bound"));
        }
        Ok(())
    }

    /// Problem data as JSON, matrices as nested `[re, im]` rows, for cross-checking elsewhere.
    pub fn to_json(&self) -> String {
        let mat = |a: &CMatrix| -> Vec<Vec<[f64; 2]>> {
            (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| [a[(i, j)].re, a[(i, j)].im]).collect()).collect()
        };
        let ineq: Vec<_> = self.ineq.iter().map(|(g, h)| serde_json::json!({ "G": mat(g), "h": h })).collect();
        serde_json::json!({ "C": mat(&self.c), "ineq": ineq, "diag_one": self.diag_one }).to_string()
    }
}

fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn row_scale(g: &CMatrix) -> f64 {
    let f = frobenius(g);
    if f > 0.0 {
        f
    } else {
        1.0
    }
}

/// `[[Re A, −Im A], [Im A, Re A]] / 2`, so that `tr(A X) = emb(A) • emb(X)·2 / 2`.
fn embed_half(a: &CMatrix, scale: f64) -> DMatrix<f64> {
    let n = a.nrows();
    let f = 0.5 / scale;
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = a[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re * f,
            (true, false) => -z.im * f,
            (false, true) => z.im * f,
        }
    })
}

fn recover_complex(y: &DMatrix<f64>, n: usize) -> CMatrix {
    let x = CMatrix::from_fn(n, n, |i, j| {
        let re = 0.5 * (y[(i, j)] + y[(i + n, j + n)]);
        let im = 0.5 * (y[(i + n, j)] - y[(i, j + n)]);
        C64::new(re, im)
    });
    hermitian_part(&x)
}

enum Row {
    Diag(usize),
    Ineq { g: DMatrix<f64>, slack: usize },
}

struct RealSdp {
    c: DMatrix<f64>,
    rows: Vec<Row>,
    b: DVector<f64>,
    slacks: usize,
    bounded: bool,
}

impl RealSdp {
    fn build(p: &SdpProblem, c_scale: f64) -> Self {
        let n = p.dim();
        let mut rows = Vec::new();
        let mut b = Vec::new();
        if p.diag_one {
            for k in 0..2 * n {
                rows.push(Row::Diag(k));
                b.push(1.0);
            }
        }
        for (j, (g, h)) in p.ineq.iter().enumerate() {
            let s = row_scale(g);
            rows.push(Row::Ineq { g: embed_half(g, s), slack: j });
            b.push(h / s);
        }
        Self { c: embed_half(&p.c, c_scale), rows, b: DVector::from_vec(b), slacks: p.ineq.len(), bounded: p.diag_one }
    }

    /// `A_i • M` for every row, without slack terms.
    fn apply(&self, m: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.rows.len(),
            self.rows.iter().map(|r| match r {
                Row::Diag(k) => m[(*k, *k)],
                Row::Ineq { g, .. } => g.dot(m),
            }),
        )
    }

    /// `Σ y_i A_i`.
    fn adjoint(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let d = self.c.nrows();
        let mut out = DMatrix::zeros(d, d);
        for (r, &yi) in self.rows.iter().zip(y.iter()) {
            match r {
                Row::Diag(k) => out[(*k, *k)] += yi,
                Row::Ineq { g, .. } => out += g * yi,
            }
        }
        out
    }

    fn slack_row(&self, j: usize) -> usize {
        self.rows
            .iter()
            .position(|r| matches!(r, Row::Ineq { slack, .. } if *slack == j))
            .expect("every slack has a row")
    }
}

struct Iterate {
    y_mat: DMatrix<f64>,
    z_mat: DMatrix<f64>,
    y: DVector<f64>,
    s: DVector<f64>,
    w: DVector<f64>,
}

struct Direction {
    dy_mat: DMatrix<f64>,
    dz_mat: DMatrix<f64>,
    dy: DVector<f64>,
    ds: DVector<f64>,
    dw: DVector<f64>,
}

struct Residuals {
    rp: DVector<f64>,
    rd: DMatrix<f64>,
    rds: DVector<f64>,
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// Largest `t` with `X + t dX ⪰ 0`, given the Cholesky factor of `X`.
fn cone_step(chol: &Cholesky<f64, nalgebra::Dyn>, dx: &DMatrix<f64>) -> f64 {
    let l = chol.l();
    let Some(a) = l.solve_lower_triangular(dx) else {
        return 0.0;
    };
    let Some(mut s) = l.solve_lower_triangular(&a.transpose()) else {
        return 0.0;
    };
    symmetrize(&mut s);
    let lambda_min = s.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
    if lambda_min >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lambda_min
    }
}

fn orthant_step(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    x.iter()
        .zip(dx.iter())
        .filter(|(_, &d)| d < 0.0)
        .map(|(&v, &d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

struct Newton<'a> {
    prob: &'a RealSdp,
    it: &'a Iterate,
    res: &'a Residuals,
    z_inv: DMatrix<f64>,
    yz: DMatrix<f64>,
    schur: SchurFactor,
    slack_rows: Vec<usize>,
}

enum SchurFactor {
    Chol(Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl SchurFactor {
    fn solve(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        match self {
            SchurFactor::Chol(c) => Some(c.solve(rhs)),
            SchurFactor::Lu(lu) => lu.solve(rhs),
        }
    }
}

impl<'a> Newton<'a> {
    fn new(prob: &'a RealSdp, it: &'a Iterate, res: &'a Residuals, z_chol: &Cholesky<f64, nalgebra::Dyn>) -> Option<Self> {
        let mut z_inv = z_chol.inverse();
        symmetrize(&mut z_inv);
        let m = prob.rows.len();
        let mut schur = DMatrix::zeros(m, m);
        // diagonal-diagonal block: Y ∘ Z⁻¹
        for (i, ri) in prob.rows.iter().enumerate() {
            if let Row::Diag(k) = ri {
                for (j, rj) in prob.rows.iter().enumerate().skip(i) {
                    if let Row::Diag(l) = rj {
                        let v = it.y_mat[(*k, *l)] * z_inv[(*k, *l)];
                        schur[(i, j)] = v;
                        schur[(j, i)] = v;
                    }
                }
            }
        }
        for (j, rj) in prob.rows.iter().enumerate() {
            if let Row::Ineq { g, .. } = rj {
                let q = &it.y_mat * g * &z_inv;
                for (i, ri) in prob.rows.iter().enumerate() {
                    let v = match ri {
                        Row::Diag(k) => q[(*k, *k)],
                        Row::Ineq { g: gi, .. } => gi.dot(&q),
                    };
                    if matches!(ri, Row::Diag(_)) {
                        schur[(i, j)] = v;
                        schur[(j, i)] = v;
                    } else {
                        schur[(i, j)] = v;
                    }
                }
            }
        }
        symmetrize(&mut schur);
        let slack_rows: Vec<usize> = (0..prob.slacks).map(|j| prob.slack_row(j)).collect();
        for (j, &row) in slack_rows.iter().enumerate() {
            schur[(row, row)] += it.s[j] / it.w[j];
        }
        if schur.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let factor = match Cholesky::new(schur.clone()) {
            Some(c) => SchurFactor::Chol(c),
            None => {
                let lu = schur.lu();
                if !lu.is_invertible() {
                    return None;
                }
                SchurFactor::Lu(lu)
            }
        };
        let yz = &it.y_mat * &it.z_mat;
        Some(Self { prob, it, res, z_inv, yz, schur: factor, slack_rows })
    }

    /// Newton direction towards the `target` point of the central path, with an
    /// optional second-order correction from a previous (affine) direction.
    fn direction(&self, target: f64, corr: Option<&Direction>) -> Option<Direction> {
        let (prob, it, res) = (self.prob, self.it, self.res);
        let d = it.y_mat.nrows();
        // R_c = τI − YZ − ΔY_a ΔZ_a
        let mut rc = -&self.yz;
        for k in 0..d {
            rc[(k, k)] += target;
        }
        if let Some(a) = corr {
            rc -= &a.dy_mat * &a.dz_mat;
        }
        let rcs: DVector<f64> = DVector::from_fn(prob.slacks, |j, _| {
            target - it.s[j] * it.w[j] - corr.map_or(0.0, |a| a.ds[j] * a.dw[j])
        });

        // T = (R_c − Y R_d) Z⁻¹
        let t = (&rc - &it.y_mat * &res.rd) * &self.z_inv;
        let mut rhs = &res.rp - prob.apply(&t);
        for (j, &row) in self.slack_rows.iter().enumerate() {
            rhs[row] += (rcs[j] - it.s[j] * res.rds[j]) / it.w[j];
        }
        let dy = self.schur.solve(&rhs)?;
        let dz_mat = &res.rd - prob.adjoint(&dy);
        let mut dy_mat = (&rc - &it.y_mat * &dz_mat) * &self.z_inv;
        symmetrize(&mut dy_mat);
        let dw = DVector::from_fn(prob.slacks, |j, _| res.rds[j] + dy[self.slack_rows[j]]);
        let ds = DVector::from_fn(prob.slacks, |j, _| (rcs[j] - it.s[j] * dw[j]) / it.w[j]);
        let ok = dy.iter().chain(dy_mat.iter()).chain(dz_mat.iter()).all(|v| v.is_finite());
        ok.then_some(Direction { dy_mat, dz_mat, dy, ds, dw })
    }
}

fn step_lengths(
    it: &Iterate,
    y_chol: &Cholesky<f64, nalgebra::Dyn>,
    z_chol: &Cholesky<f64, nalgebra::Dyn>,
    dir: &Direction,
) -> (f64, f64) {
    let primal = cone_step(y_chol, &dir.dy_mat).min(orthant_step(&it.s, &dir.ds));
    let dual = cone_step(z_chol, &dir.dz_mat).min(orthant_step(&it.w, &dir.dw));
    (primal, dual)
}

pub fn solve_sdp(p: &SdpProblem, opts: &SdpOptions) -> Result<SdpSolution> {
    p.validate()?;
    let n = p.dim();
    let c_norm = frobenius(&p.c);
    let c_scale = if c_norm > 0.0 { c_norm } else { 1.0 };
    let prob = RealSdp::build(p, c_scale);
    let d = 2 * n;
    let cone_dim = (d + prob.slacks) as f64;
    let c_fro = prob.c.norm();

    let h_max = prob.b.iter().skip(if p.diag_one { d } else { 0 }).fold(0.0f64, |m, h| m.max(h.abs()));
    let xi = 1.0 + h_max;
    let eta = 1.0 + c_fro.max(1.0);
    let mut it = Iterate {
        y_mat: DMatrix::identity(d, d) * xi,
        z_mat: DMatrix::identity(d, d) * eta,
        y: DVector::zeros(prob.rows.len()),
        s: DVector::from_element(prob.slacks, xi),
        w: DVector::from_element(prob.slacks, eta),
    };

    let mut status = SdpStatus::MaxIters;
    let mut iterations = 0;
    let mut stall = 0usize;
    let mut last: Option<(f64, f64)> = None;
    let mut stats;
    // last iterate meeting the requested tolerances, kept while polishing towards tighter ones
    let mut accepted: Option<(DMatrix<f64>, (f64, f64, f64, f64, f64), usize)> = None;

    loop {
        // residuals
        let mut ay = prob.apply(&it.y_mat);
        for j in 0..prob.slacks {
            ay[prob.slack_row(j)] -= it.s[j];
        }
        let rp = &prob.b - ay;
        let rd = &prob.c - prob.adjoint(&it.y) - &it.z_mat;
        let rds = DVector::from_fn(prob.slacks, |j, _| it.y[prob.slack_row(j)] - it.w[j]);
        let mu = (it.y_mat.dot(&it.z_mat) + it.s.dot(&it.w)) / cone_dim;
        let pobj = prob.c.dot(&it.y_mat);
        let dobj = prob.b.dot(&it.y);
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        let pinf = rp.amax();
        let dinf = (rd.norm() + rds.norm()) / (1.0 + c_fro);
        stats = (pobj, dobj, gap, pinf, dinf);

        if ![mu, pobj, dobj, pinf, dinf].iter().all(|v| v.is_finite()) {
            status = SdpStatus::NumericalFailure;
            break;
        }
        if gap <= opts.gap_tol && pinf <= opts.feas_tol && dinf <= opts.feas_tol {
            let polish = 1e-2;
            if gap <= polish * opts.gap_tol && pinf <= polish * opts.feas_tol && dinf <= polish * opts.feas_tol {
                status = SdpStatus::Optimal;
                accepted = None;
                break;
            }
            accepted = Some((it.y_mat.clone(), stats, iterations));
        }
        // A bounded primal set caps tr(C Y); a dual objective above the cap is an infeasibility certificate.
        if prob.bounded && dobj > 2.0 * (c_fro + rd.norm() + rds.norm()) * d as f64 + 1.0 {
            status = SdpStatus::Infeasible;
            break;
        }
        if let Some((mu_prev, pinf_prev)) = last {
            if mu > 0.99 * mu_prev && pinf >= pinf_prev {
                stall += 1;
            } else {
                stall = 0;
            }
            if stall >= 10 {
                status = SdpStatus::Infeasible;
                break;
            }
        }
        last = Some((mu, pinf));
        if iterations >= opts.max_iters {
            break;
        }
        iterations += 1;

        let (Some(y_chol), Some(z_chol)) = (Cholesky::new(it.y_mat.clone()), Cholesky::new(it.z_mat.clone())) else {
            status = SdpStatus::NumericalFailure;
            break;
        };
        let res = Residuals { rp, rd, rds };
        let Some(newton) = Newton::new(&prob, &it, &res, &z_chol) else {
            status = SdpStatus::NumericalFailure;
            break;
        };
        let Some(affine) = newton.direction(0.0, None) else {
            status = SdpStatus::NumericalFailure;
            break;
        };
        let (ap, ad) = step_lengths(&it, &y_chol, &z_chol, &affine);
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let mu_aff = ((&it.y_mat + &affine.dy_mat * ap).dot(&(&it.z_mat + &affine.dz_mat * ad))
            + (&it.s + &affine.ds * ap).dot(&(&it.w + &affine.dw * ad)))
            / cone_dim;
        let sigma = (mu_aff.max(0.0) / mu).powi(3).clamp(0.0, 1.0);
        let Some(dir) = newton.direction(sigma * mu, Some(&affine)) else {
            status = SdpStatus::NumericalFailure;
            break;
        };
        let (ap, ad) = step_lengths(&it, &y_chol, &z_chol, &dir);
        let ap = (opts.step_fraction * ap).min(1.0);
        let ad = (opts.step_fraction * ad).min(1.0);

        it.y_mat += &dir.dy_mat * ap;
        it.s.axpy(ap, &dir.ds, 1.0);
        it.y.axpy(ad, &dir.dy, 1.0);
        it.z_mat += &dir.dz_mat * ad;
        it.w.axpy(ad, &dir.dw, 1.0);
        symmetrize(&mut it.y_mat);
        symmetrize(&mut it.z_mat);
    }

    let mut y_final = it.y_mat;
    if let Some((y_ok, stats_ok, iters_ok)) = accepted {
        y_final = y_ok;
        stats = stats_ok;
        iterations = iters_ok;
        status = SdpStatus::Optimal;
    }
    let x = recover_complex(&y_final, n);
    let objective = trace_inner(&p.c, &x);
    let (_, dobj, gap, pinf, dinf) = stats;
    log::debug!("sdp n={n} status={status:?} iters={iterations} obj={objective:e} gap={gap:e} pinf={pinf:e}");
    Ok(SdpSolution {
        x,
        objective,
        dual_objective: dobj * c_scale,
        duality_gap: gap,
        primal_residual: pinf,
        dual_residual: dinf,
        iterations,
        status,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpCheck {
    pub name: String,
    pub value: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpVerification {
    pub checks: Vec<SdpCheck>,
    pub objective: f64,
}

impl SdpVerification {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&SdpCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Independently recompute feasibility and objective of a candidate solution.
pub fn verify_solution(p: &SdpProblem, sol: &SdpSolution) -> SdpVerification {
    let x = &sol.x;
    let mut checks = Vec::new();
    let eig_min = eig_min_hermitian(&hermitian_part(x)).unwrap_or(f64::NEG_INFINITY);
    checks.push(SdpCheck { name: "psd".into(), value: eig_min, pass: eig_min >= -1e-8 });
    if p.diag_one {
        let diag = (0..x.nrows()).map(|k| (x[(k, k)].re - 1.0).abs()).fold(0.0, f64::max);
        checks.push(SdpCheck { name: "diag".into(), value: diag, pass: diag <= 1e-7 });
    }
    for (j, (g, h)) in p.ineq.iter().enumerate() {
        let slack = (trace_inner(g, x) - h) / row_scale(g);
        checks.push(SdpCheck { name: format!("ineq{j}"), value: slack, pass: slack >= -1e-7 });
    }
    let objective = trace_inner(&p.c, x);
    let err = (objective - sol.objective).abs();
    checks.push(SdpCheck { name: "objective".into(), value: err, pass: err <= 1e-9 * (1.0 + objective.abs()) });
    SdpVerification { checks, objective }
}
