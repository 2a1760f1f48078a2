use std::io::Write;

use super::compile::CompiledFamily;
use super::MpcError;
use crate::certify::format_f64;
use crate::ellipsoid::SolverStatus;
use crate::linalg::{DenseMatrix, DenseVector};

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub step: usize,
    pub t: f64,
    pub x: DenseVector,
    /// `None` on the final state row.
    pub u: Option<DenseVector>,
    pub status: Option<SolverStatus>,
    pub iterations: Option<usize>,
    pub best_cost: Option<f64>,
}

/// Closed-loop run; `failure` is set when a solve aborted the run early.
#[derive(Debug)]
pub struct Trajectory {
    pub rows: Vec<TrajectoryRow>,
    pub n_s: usize,
    pub n_u: usize,
    pub dt: f64,
    pub failure: Option<MpcError>,
}

impl Trajectory {
    pub fn states(&self) -> impl Iterator<Item = &DenseVector> {
        self.rows.iter().map(|r| &r.x)
    }

    pub fn final_state(&self) -> &DenseVector {
        &self.rows.last().expect("trajectory holds the initial state").x
    }

    /// CSV with header `step,t,x1..xn,u1..um,status,iterations,best_cost`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["step".to_string(), "t".to_string()];
        header.extend((1..=self.n_s).map(|i| format!("x{i}")));
        header.extend((1..=self.n_u).map(|i| format!("u{i}")));
        header.extend(["status", "iterations", "best_cost"].map(String::from));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.step.to_string(), format_f64(r.t)];
            rec.extend(r.x.iter().map(|&v| format_f64(v)));
            match &r.u {
                Some(u) => rec.extend(u.iter().map(|&v| format_f64(v))),
                None => rec.extend((0..self.n_u).map(|_| String::new())),
            }
            rec.push(r.status.map_or(String::new(), |s| s.to_string()));
            rec.push(r.iterations.map_or(String::new(), |i| i.to_string()));
            rec.push(r.best_cost.map_or(String::new(), format_f64));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Closed loop with `T = 0.5`.
pub fn simulate(
    fam: &CompiledFamily,
    a: &DenseMatrix,
    b: &DenseMatrix,
    x0: &DenseVector,
    steps: usize,
) -> Result<Trajectory, MpcError> {
    simulate_with_step(fam, a, b, x0, steps, 0.5)
}

/// `x_{k+1} = A x_k + B u_k` with `u_k` the output of the instance at `x_k`.
/// An empty output applies `u = 0`.
pub fn simulate_with_step(
    fam: &CompiledFamily,
    a: &DenseMatrix,
    b: &DenseMatrix,
    x0: &DenseVector,
    steps: usize,
    dt: f64,
) -> Result<Trajectory, MpcError> {
    let n_s = a.rows();
    let n_u = b.cols();
    let bad = |detail: String| MpcError::Unsupported(format!("plant: {detail}"));
    if a.cols() != n_s || b.rows() != n_s {
        return Err(bad(format!("A is {}x{}, B is {}x{}", a.rows(), a.cols(), b.rows(), b.cols())));
    }
    if x0.len() != n_s || fam.input_dim != n_s {
        return Err(bad(format!("state has length {}, model input has {}, A has {}", x0.len(), fam.input_dim, n_s)));
    }
    if fam.output_dim() != 0 && fam.output_dim() != n_u {
        return Err(bad(format!("model output has length {}, B has {} columns", fam.output_dim(), n_u)));
    }
    let cfg = fam.solver_config()?;
    let mut traj = Trajectory { rows: Vec::with_capacity(steps + 1), n_s, n_u, dt, failure: None };
    let mut x = x0.clone();
    for step in 0..steps {
        let sol = match fam.solve_instance_with(&x, &cfg) {
            Ok(s) => s,
            Err((e, _)) => {
                traj.rows.push(TrajectoryRow {
                    step,
                    t: step as f64 * dt,
                    x,
                    u: None,
                    status: None,
                    iterations: None,
                    best_cost: None,
                });
                traj.failure = Some(e);
                return Ok(traj);
            }
        };
        let u = if fam.output_dim() == 0 { DenseVector::zeros(n_u) } else { sol.u_applied.clone() };
        let next = a.mul_vec(&x).add(&b.mul_vec(&u));
        traj.rows.push(TrajectoryRow {
            step,
            t: step as f64 * dt,
            x,
            u: Some(u),
            status: Some(sol.outcome.status),
            iterations: Some(sol.outcome.iterations_used),
            best_cost: sol.outcome.best.as_ref().map(|p| p.cost),
        });
        x = next;
    }
    traj.rows.push(TrajectoryRow {
        step: steps,
        t: steps as f64 * dt,
        x,
        u: None,
        status: None,
        iterations: None,
        best_cost: None,
    });
    Ok(traj)
}
