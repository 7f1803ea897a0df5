//! Finite-difference integrator for the shallow water system and a
//! conservation audit of computed currents on the simulated flow.
//!
//! Nodes sit at cell centres, x_i = x0 + (i + ½)Δx. Spatial derivatives are
//! fourth-order central differences, with one-sided five-point stencils near
//! the edges of non-periodic grids. The depth equation is in flux form, so on
//! periodic grids the discrete mass changes only by rounding.

use crate::charspace::{CharTuple, CurrentField};
use crate::error::{Error, Result};
use crate::topography::{fd_weights, Topography};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    Periodic,
    /// No boundary conditions are imposed; fluxes through the edges of the
    /// audit box are measured instead.
    Audited,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub x0: f64,
    pub y0: f64,
    pub boundary: Boundary,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64, x0: f64, y0: f64, boundary: Boundary) -> Result<Grid> {
        if nx < 16 || ny < 16 {
            return Err(Error::Config(format!("grid needs at least 16 nodes per direction, got {nx}×{ny}")));
        }
        if !(dx > 0.0 && dy > 0.0) {
            return Err(Error::Config(format!("grid spacing must be positive, got ({dx}, {dy})")));
        }
        Ok(Grid { nx, ny, dx, dy, x0, y0, boundary })
    }

    /// n×n cells covering [lo, hi]².
    pub fn square(n: usize, lo: f64, hi: f64, boundary: Boundary) -> Result<Grid> {
        let d = (hi - lo) / n as f64;
        Grid::new(n, n, d, d, lo, lo, boundary)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + (i as f64 + 0.5) * self.dx
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y0 + (j as f64 + 0.5) * self.dy
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        (0..self.ny).flat_map(|j| (0..self.nx).map(move |i| (i, j))).map(|(i, j)| (self.x(i), self.y(j))).collect()
    }

    pub fn from_fn(&self, f: impl Fn(f64, f64) -> f64 + Sync) -> Vec<f64> {
        (0..self.len()).into_par_iter().map(|k| f(self.x(k % self.nx), self.y(k / self.nx))).collect()
    }

    /// ∂/∂x of a nodal field.
    pub fn ddx(&self, f: &[f64]) -> Vec<f64> {
        let st = Stencil::new(self.nx, self.boundary);
        let mut out = vec![0.0; f.len()];
        out.par_chunks_mut(self.nx).enumerate().for_each(|(j, row)| {
            let line = &f[j * self.nx..(j + 1) * self.nx];
            for (i, o) in row.iter_mut().enumerate() {
                *o = st.apply(i, |k| line[k]) / self.dx;
            }
        });
        out
    }

    /// ∂/∂y of a nodal field.
    pub fn ddy(&self, f: &[f64]) -> Vec<f64> {
        let st = Stencil::new(self.ny, self.boundary);
        let nx = self.nx;
        let mut out = vec![0.0; f.len()];
        out.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
            for (i, o) in row.iter_mut().enumerate() {
                *o = st.apply(j, |k| f[k * nx + i]) / self.dy;
            }
        });
        out
    }
}

/// Fourth-order first-derivative stencils along one direction.
struct Stencil {
    n: usize,
    periodic: bool,
    /// one-sided weights for the first two and last two nodes
    edge: Vec<(Vec<isize>, Vec<f64>)>,
}

/// Differences are formed before weighting, so constants give exactly 0.
fn central(f: impl Fn(isize) -> f64) -> f64 {
    (8.0 * (f(1) - f(-1)) - (f(2) - f(-2))) / 12.0
}

impl Stencil {
    fn new(n: usize, b: Boundary) -> Stencil {
        let periodic = b == Boundary::Periodic;
        let mut edge = vec![];
        if !periodic {
            for i in [0usize, 1, n - 2, n - 1] {
                let lo = (i as isize - 2).clamp(0, n as isize - 5);
                let offs: Vec<isize> = (lo..lo + 5).map(|k| k - i as isize).collect();
                let w = fd_weights(&offs);
                edge.push((offs, w));
            }
        }
        Stencil { n, periodic, edge }
    }

    fn apply(&self, i: usize, f: impl Fn(usize) -> f64) -> f64 {
        let n = self.n as isize;
        if self.periodic {
            return central(|o| f((i as isize + o).rem_euclid(n) as usize));
        }
        let slot = match i {
            0 => Some(0),
            1 => Some(1),
            _ if i == self.n - 2 => Some(2),
            _ if i == self.n - 1 => Some(3),
            _ => None,
        };
        match slot {
            Some(s) => {
                let (offs, w) = &self.edge[s];
                offs.iter().zip(w).map(|(&o, &c)| c * f((i as isize + o) as usize)).sum()
            }
            None => central(|o| f((i as isize + o) as usize)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub grid: Grid,
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub h: Vec<f64>,
}

impl SimState {
    pub fn from_fn(grid: Grid, t: f64, f: impl Fn(f64, f64) -> (f64, f64, f64) + Sync) -> Result<SimState> {
        let vals: Vec<(f64, f64, f64)> = (0..grid.len()).into_par_iter().map(|k| f(grid.x(k % grid.nx), grid.y(k / grid.nx))).collect();
        let s = SimState {
            grid,
            t,
            u: vals.iter().map(|p| p.0).collect(),
            v: vals.iter().map(|p| p.1).collect(),
            h: vals.iter().map(|p| p.2).collect(),
        };
        s.check_positive()?;
        Ok(s)
    }

    pub fn check_positive(&self) -> Result<()> {
        match self.h.iter().position(|&h| !(h > 0.0)) {
            Some(k) => Err(Error::State(format!(
                "depth {} at ({}, {}) is not positive",
                self.h[k],
                self.grid.x(k % self.grid.nx),
                self.grid.y(k / self.grid.nx)
            ))),
            None => Ok(()),
        }
    }

    /// Largest stable step: 0.5·min(Δx, Δy)/max(|u| + √h, |v| + √h).
    pub fn cfl_limit(&self) -> f64 {
        let speed = (0..self.h.len())
            .map(|k| {
                let c = self.h[k].max(0.0).sqrt();
                (self.u[k].abs() + c).max(self.v[k].abs() + c)
            })
            .fold(0.0, f64::max);
        0.5 * self.grid.dx.min(self.grid.dy) / speed.max(f64::MIN_POSITIVE)
    }

    pub fn max_grad_h(&self) -> f64 {
        let hx = self.grid.ddx(&self.h);
        let hy = self.grid.ddy(&self.h);
        hx.iter().zip(&hy).map(|(a, b)| a.hypot(*b)).fold(0.0, f64::max)
    }

    /// Σh ΔxΔy over all nodes.
    pub fn mass(&self) -> f64 {
        self.h.iter().sum::<f64>() * self.grid.dx * self.grid.dy
    }
}

/// Bottom gradient sampled on a grid.
#[derive(Clone, Debug)]
pub struct Bottom {
    pub bx: Vec<f64>,
    pub by: Vec<f64>,
}

impl Bottom {
    pub fn new(topo: &Topography, grid: &Grid) -> Result<Bottom> {
        let vals: Vec<(f64, f64)> = grid.points().into_par_iter().map(|(x, y)| topo.eval_b(x, y).map(|b| (b.1, b.2))).collect::<Result<_>>()?;
        Ok(Bottom { bx: vals.iter().map(|p| p.0).collect(), by: vals.iter().map(|p| p.1).collect() })
    }
}

pub type Tendency = (Vec<f64>, Vec<f64>, Vec<f64>);

/// Time derivatives (u_t, v_t, h_t) of a state.
pub fn rhs(state: &SimState, topo: &Topography) -> Result<Tendency> {
    rhs_with(state, &Bottom::new(topo, &state.grid)?)
}

pub fn rhs_with(state: &SimState, bottom: &Bottom) -> Result<Tendency> {
    state.check_positive()?;
    let g = &state.grid;
    let (u, v, h) = (&state.u, &state.v, &state.h);
    let (ux, uy) = (g.ddx(u), g.ddy(u));
    let (vx, vy) = (g.ddx(v), g.ddy(v));
    let (hx, hy) = (g.ddx(h), g.ddy(h));
    let fu: Vec<f64> = u.iter().zip(h).map(|(a, b)| a * b).collect();
    let fv: Vec<f64> = v.iter().zip(h).map(|(a, b)| a * b).collect();
    let (dfu, dfv) = (g.ddx(&fu), g.ddy(&fv));
    let n = g.len();
    let mut ut = vec![0.0; n];
    let mut vt = vec![0.0; n];
    let mut ht = vec![0.0; n];
    ut.par_iter_mut()
        .zip(vt.par_iter_mut())
        .zip(ht.par_iter_mut())
        .enumerate()
        .for_each(|(k, ((a, b), c))| {
            *a = -u[k] * ux[k] - v[k] * uy[k] - hx[k] + bottom.bx[k];
            *b = -u[k] * vx[k] - v[k] * vy[k] - hy[k] + bottom.by[k];
            *c = -(dfu[k] + dfv[k]);
        });
    Ok((ut, vt, ht))
}

fn axpy(s: &SimState, k: &Tendency, a: f64) -> SimState {
    let f = |x: &[f64], d: &[f64]| x.iter().zip(d).map(|(p, q)| p + a * q).collect::<Vec<_>>();
    SimState { grid: s.grid, t: s.t + a, u: f(&s.u, &k.0), v: f(&s.v, &k.1), h: f(&s.h, &k.2) }
}

pub fn step_rk4(state: &SimState, topo: &Topography, dt: f64) -> Result<SimState> {
    step_rk4_with(state, &Bottom::new(topo, &state.grid)?, dt)
}

pub fn step_rk4_with(state: &SimState, bottom: &Bottom, dt: f64) -> Result<SimState> {
    let lim = state.cfl_limit();
    if !(dt > 0.0) || dt > lim {
        return Err(Error::Config(format!("time step {dt} violates the CFL bound {lim}")));
    }
    let k1 = rhs_with(state, bottom)?;
    let k2 = rhs_with(&axpy(state, &k1, 0.5 * dt), bottom)?;
    let k3 = rhs_with(&axpy(state, &k2, 0.5 * dt), bottom)?;
    let k4 = rhs_with(&axpy(state, &k3, dt), bottom)?;
    let comb = |x: &[f64], a: &[f64], b: &[f64], c: &[f64], d: &[f64]| {
        (0..x.len()).map(|i| x[i] + dt / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i])).collect::<Vec<_>>()
    };
    let out = SimState {
        grid: state.grid,
        t: state.t + dt,
        u: comb(&state.u, &k1.0, &k2.0, &k3.0, &k4.0),
        v: comb(&state.v, &k1.1, &k2.1, &k3.1, &k4.1),
        h: comb(&state.h, &k1.2, &k2.2, &k3.2, &k4.2),
    };
    out.check_positive()?;
    Ok(out)
}

/// Balance history of one tuple.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub label: String,
    /// ∬C¹ over the audit box at every step
    pub integral: Vec<f64>,
    /// outward normal flux of (C², C³) through the box edges at every step
    pub boundary_flux: Vec<f64>,
    /// d/dt∬C¹ + flux, by centred differences; NaN at the first and last step
    pub residual: Vec<f64>,
}

impl AuditRecord {
    pub fn max_residual(&self) -> f64 {
        self.residual.iter().filter(|r| r.is_finite()).fold(0.0, |m, r| m.max(r.abs()))
    }

    /// Largest |∬C¹(t) − ∬C¹(0)| relative to |∬C¹(0)|.
    pub fn relative_drift(&self) -> f64 {
        let i0 = self.integral[0];
        self.integral.iter().map(|i| (i - i0).abs()).fold(0.0, f64::max) / i0.abs().max(f64::MIN_POSITIVE)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub times: Vec<f64>,
    pub records: Vec<AuditRecord>,
}

impl AuditReport {
    /// step, t, then (integral, boundary_flux, residual) per tuple.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(vec![]);
        let mut head = vec!["step".to_string(), "t".to_string()];
        for r in &self.records {
            for col in ["integral", "boundary_flux", "residual"] {
                head.push(format!("{}:{col}", r.label));
            }
        }
        w.write_record(&head).map_err(|e| Error::Io(e.to_string()))?;
        for (n, t) in self.times.iter().enumerate() {
            let mut row = vec![n.to_string(), format!("{t:.16e}")];
            for r in &self.records {
                for v in [r.integral[n], r.boundary_flux[n], r.residual[n]] {
                    row.push(format!("{v:.16e}"));
                }
            }
            w.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }
}

/// Audit settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditOptions {
    pub t_end: f64,
    pub dt: f64,
    /// cells between the grid edge and the audit box (non-periodic grids)
    pub margin: usize,
    /// the audit stops with a state error once max|∇h| exceeds this
    pub max_grad_h: f64,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions { t_end: 1.0, dt: 0.01, margin: 4, max_grad_h: 50.0 }
    }
}

/// Interior integral and boundary flux of every tuple's current.
fn balance_terms(state: &SimState, b: &[f64], fields: &[CurrentField], margin: usize) -> Vec<(f64, f64)> {
    let g = &state.grid;
    let currents: Vec<Vec<[f64; 3]>> = fields
        .iter()
        .map(|cf| {
            (0..g.len())
                .into_par_iter()
                .map(|k| {
                    let (i, j) = (k % g.nx, k / g.nx);
                    cf.at([state.t, g.x(i), g.y(j), state.u[k], state.v[k], state.h[k]], b[k])
                })
                .collect()
        })
        .collect();
    let cell = g.dx * g.dy;
    currents
        .iter()
        .map(|c| match g.boundary {
            Boundary::Periodic => (c.iter().map(|v| v[0]).sum::<f64>() * cell, 0.0),
            Boundary::Audited => {
                let (i0, i1) = (margin, g.nx - margin);
                let (j0, j1) = (margin, g.ny - margin);
                let mut area = 0.0;
                for j in j0..j1 {
                    for i in i0..i1 {
                        area += c[g.idx(i, j)][0];
                    }
                }
                // edge values by the four-point midpoint interpolant
                let edge = |a: f64, b: f64, cc: f64, d: f64| (-a + 9.0 * b + 9.0 * cc - d) / 16.0;
                let mut flux = 0.0;
                for j in j0..j1 {
                    let at = |i: usize| c[g.idx(i, j)][1];
                    flux += (edge(at(i1 - 2), at(i1 - 1), at(i1), at(i1 + 1)) - edge(at(i0 - 2), at(i0 - 1), at(i0), at(i0 + 1))) * g.dy;
                }
                for i in i0..i1 {
                    let at = |j: usize| c[g.idx(i, j)][2];
                    flux += (edge(at(j1 - 2), at(j1 - 1), at(j1), at(j1 + 1)) - edge(at(j0 - 2), at(j0 - 1), at(j0), at(j0 + 1))) * g.dx;
                }
                (area * cell, flux)
            }
        })
        .collect()
}

/// Integrates from `init` to `opts.t_end` and records the balance of every
/// tuple's current at each step.
pub fn run_audit(init: &SimState, topo: &Topography, tuples: &[(String, CharTuple)], opts: &AuditOptions) -> Result<AuditReport> {
    Ok(run_audit_final(init, topo, tuples, opts)?.0)
}

/// `run_audit`, also returning the final state.
pub fn run_audit_final(init: &SimState, topo: &Topography, tuples: &[(String, CharTuple)], opts: &AuditOptions) -> Result<(AuditReport, SimState)> {
    let g = init.grid;
    if g.boundary == Boundary::Audited && (opts.margin < 2 || 2 * opts.margin + 1 >= g.nx.min(g.ny)) {
        return Err(Error::Config(format!("audit margin {} does not fit a {}×{} grid", opts.margin, g.nx, g.ny)));
    }
    let steps = (opts.t_end / opts.dt).round() as usize;
    if steps < 2 {
        return Err(Error::Config("an audit needs at least two steps".into()));
    }
    let dt = opts.t_end / steps as f64;
    let bottom = Bottom::new(topo, &g)?;
    let fields: Vec<CurrentField> = tuples.iter().map(|p| CurrentField::new(&p.1)).collect();
    let b: Vec<f64> = g.points().into_par_iter().map(|(x, y)| topo.eval_b(x, y).map(|v| v.0)).collect::<Result<_>>()?;
    let mut times = vec![init.t];
    let mut terms = vec![balance_terms(init, &b, &fields, opts.margin)];
    let mut s = init.clone();
    for _ in 0..steps {
        s = step_rk4_with(&s, &bottom, dt)?;
        let gh = s.max_grad_h();
        if gh > opts.max_grad_h {
            return Err(Error::State(format!("max|∇h| = {gh} exceeds the smoothness guard at t = {}", s.t)));
        }
        times.push(s.t);
        terms.push(balance_terms(&s, &b, &fields, opts.margin));
    }
    let records = tuples
        .iter()
        .enumerate()
        .map(|(m, (label, _))| {
            let integral: Vec<f64> = terms.iter().map(|t| t[m].0).collect();
            let boundary_flux: Vec<f64> = terms.iter().map(|t| t[m].1).collect();
            let residual = (0..=steps)
                .map(|n| if n == 0 || n == steps { f64::NAN } else { (integral[n + 1] - integral[n - 1]) / (2.0 * dt) + boundary_flux[n] })
                .collect();
            AuditRecord { label: label.clone(), integral, boundary_flux, residual }
        })
        .collect();
    Ok((AuditReport { times, records }, s))
}

/// Observed order from errors on successively halved grids (least-squares
/// slope of log₂ error against refinement level).
pub fn observed_order(errors: &[f64]) -> f64 {
    let n = errors.len() as f64;
    let xs: Vec<f64> = (0..errors.len()).map(|i| i as f64).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.log2()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    -sxy / sxx
}

/// Smooth periodic test state on [lo, hi]²: a few low Fourier modes in
/// u and v and a positive depth.
pub fn smooth_periodic_state(grid: Grid, amplitude: f64) -> Result<SimState> {
    let lx = grid.dx * grid.nx as f64;
    let ly = grid.dy * grid.ny as f64;
    let (x0, y0) = (grid.x0, grid.y0);
    let k = std::f64::consts::TAU;
    SimState::from_fn(grid, 0.0, move |x, y| {
        let (a, b) = (k * (x - x0) / lx, k * (y - y0) / ly);
        let u = amplitude * (a.sin() * b.cos() + 0.3 * (2.0 * b).sin());
        let v = amplitude * (0.5 * (a + b).cos() - 0.4 * a.cos() * (2.0 * b).sin());
        let h = 1.0 + 0.3 * amplitude * ((a - b).cos() + 0.5 * (2.0 * a).sin() * b.sin());
        (u, v, h)
    })
}

/// Still water with a Gaussian hump in the depth centred at `centre`.
pub fn gaussian_hump(grid: Grid, depth: f64, amp: f64, width: f64, centre: (f64, f64)) -> Result<SimState> {
    SimState::from_fn(grid, 0.0, move |x, y| {
        let r2 = (x - centre.0).powi(2) + (y - centre.1).powi(2);
        (0.0, 0.0, depth + amp * (-r2 / (width * width)).exp())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timefun::QuasiPoly;
    use crate::topography::{CaseId, CaseParams};

    fn flat() -> Topography {
        Topography::make_case(CaseId::C14a, CaseParams::default(), None).unwrap()
    }

    #[test]
    fn derivatives_are_fourth_order() {
        let err = |n: usize, b: Boundary| {
            let g = Grid::square(n, -1.0, 1.0, b).unwrap();
            let f = g.from_fn(|x, y| (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).cos());
            let dx = g.ddx(&f);
            let dy = g.ddy(&f);
            let ex = g.from_fn(|x, y| std::f64::consts::PI * (std::f64::consts::PI * x).cos() * (std::f64::consts::PI * y).cos());
            let ey = g.from_fn(|x, y| -std::f64::consts::PI * (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin());
            (0..f.len()).map(|k| (dx[k] - ex[k]).abs().max((dy[k] - ey[k]).abs())).fold(0.0, f64::max)
        };
        for b in [Boundary::Periodic, Boundary::Audited] {
            let order = observed_order(&[err(32, b), err(64, b), err(128, b)]);
            assert!(order > 3.7, "{b:?}: order {order}");
        }
    }

    #[test]
    fn still_states_have_no_tendency() {
        let g = Grid::square(32, -1.0, 1.0, Boundary::Periodic).unwrap();
        let s = SimState::from_fn(g, 0.0, |_, _| (0.0, 0.0, 1.0)).unwrap();
        let (a, b, c) = rhs(&s, &flat()).unwrap();
        assert!(a.iter().chain(&b).chain(&c).all(|&x| x == 0.0));
        let next = step_rk4(&s, &flat(), 0.01).unwrap();
        assert_eq!(next.h, s.h);
        // lake at rest over a bump: h − b constant
        let bump = Topography::from_expr("0.2*exp(-x^2-y^2)", vec![]).unwrap();
        let g = Grid::square(64, -3.0, 3.0, Boundary::Audited).unwrap();
        let s = SimState::from_fn(g, 0.0, |x, y| (0.0, 0.0, 1.0 + 0.2 * (-x * x - y * y).exp())).unwrap();
        let (a, b, c) = rhs(&s, &bump).unwrap();
        let m = a.iter().chain(&b).chain(&c).fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(m < 2e-4, "{m}");
    }

    #[test]
    fn guards() {
        let g = Grid::square(32, -1.0, 1.0, Boundary::Periodic).unwrap();
        assert!(matches!(SimState::from_fn(g, 0.0, |x, _| (0.0, 0.0, x)), Err(Error::State(_))));
        let s = SimState::from_fn(g, 0.0, |_, _| (0.0, 0.0, 1.0)).unwrap();
        assert!(matches!(step_rk4(&s, &flat(), 1.0), Err(Error::Config(_))));
        assert!(matches!(Grid::square(8, 0.0, 1.0, Boundary::Periodic), Err(Error::Config(_))));
    }

    #[test]
    fn rk4_step_is_fifth_order_locally() {
        // Richardson: one step of dt against two of dt/2.
        let g = Grid::square(32, 0.0, 1.0, Boundary::Periodic).unwrap();
        let s = smooth_periodic_state(g, 0.2).unwrap();
        let topo = flat();
        let diff = |dt: f64| {
            let a = step_rk4(&s, &topo, dt).unwrap();
            let b = step_rk4(&step_rk4(&s, &topo, dt / 2.0).unwrap(), &topo, dt / 2.0).unwrap();
            a.h.iter().zip(&b.h).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
        };
        let order = (diff(4e-3) / diff(2e-3)).log2();
        assert!(order > 4.6, "{order}");
    }

    #[test]
    fn mass_is_conserved_to_rounding() {
        let g = Grid::square(32, -2.0, 2.0, Boundary::Periodic).unwrap();
        let s = gaussian_hump(g, 1.0, 0.2, 0.5, (0.0, 0.0)).unwrap();
        let rep = run_audit(&s, &flat(), &[("mass".into(), CharTuple::lambda4(QuasiPoly::constant(1.0)))], &AuditOptions { t_end: 0.5, dt: 0.01, ..Default::default() }).unwrap();
        assert!(rep.records[0].relative_drift() < 1e-13, "{}", rep.records[0].relative_drift());
        assert!(rep.to_csv().unwrap().lines().count() == rep.times.len() + 1);
    }
}
