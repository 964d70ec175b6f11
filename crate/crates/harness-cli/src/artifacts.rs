//! Artifact writers. CSV uses `.` decimals, LF line endings and a header
//! row; floats carry 17 significant digits so reruns are byte-identical.

use std::fmt::Write as _;

use pme_core::diagnostics::{BoundaryStat, DiagRow};
use serde::Serialize;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn diag_csv(rows: &[DiagRow]) -> String {
    let mut out = String::new();
    let two_d = matches!(rows.first().map(|r| &r.boundary), Some(BoundaryStat::TwoD { .. }));
    if two_d {
        out.push_str(
            "t,energy,dissipation,total_mass,mass_vector_err,boundary_hash,r_min,r_mean,r_max,max_displacement,fp_iters,energy_identity_err,flags\n",
        );
    } else {
        out.push_str(
            "t,energy,dissipation,total_mass,mass_vector_err,boundary_a,boundary_b,fp_iters,energy_identity_err,flags\n",
        );
    }
    for row in rows {
        let _ = write!(
            out,
            "{},{},{},{},{}",
            fmt_f64(row.t),
            fmt_f64(row.energy),
            fmt_f64(row.dissipation),
            fmt_f64(row.total_mass),
            fmt_f64(row.mass_vector_err),
        );
        match row.boundary {
            BoundaryStat::OneD { a, b } => {
                let _ = write!(out, ",{},{}", fmt_f64(a), fmt_f64(b));
            }
            BoundaryStat::TwoD { hash, r_min, r_mean, r_max, max_displacement } => {
                let _ = write!(
                    out,
                    ",{hash},{},{},{},{}",
                    fmt_f64(r_min),
                    fmt_f64(r_mean),
                    fmt_f64(r_max),
                    fmt_f64(max_displacement),
                );
            }
        }
        let _ = writeln!(
            out,
            ",{},{},{}",
            row.fp_iters,
            fmt_f64(row.energy_identity_err),
            row.flags
        );
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundarySummary {
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub r_min: Option<f64>,
    pub r_mean: Option<f64>,
    pub r_max: Option<f64>,
    pub max_displacement: Option<f64>,
}

impl From<&BoundaryStat> for BoundarySummary {
    fn from(stat: &BoundaryStat) -> Self {
        match *stat {
            BoundaryStat::OneD { a, b } => BoundarySummary {
                a: Some(a),
                b: Some(b),
                r_min: None,
                r_mean: None,
                r_max: None,
                max_displacement: None,
            },
            BoundaryStat::TwoD { r_min, r_mean, r_max, max_displacement, .. } => BoundarySummary {
                a: None,
                b: None,
                r_min: Some(r_min),
                r_mean: Some(r_mean),
                r_max: Some(r_max),
                max_displacement: Some(max_displacement),
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub dim: usize,
    pub scheme: String,
    pub m: f64,
    pub tau: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub steps_taken: usize,
    pub final_t: f64,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub initial_mass: f64,
    pub final_mass: f64,
    pub mass_drift: f64,
    pub mass_vector_err: f64,
    pub waiting_time: Option<f64>,
    pub flagged_steps: usize,
    pub total_fp_iters: usize,
    pub stopped: Option<String>,
    pub boundary: BoundarySummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergeLevel {
    pub level: usize,
    pub n: f64,
    pub tau: f64,
    pub err_l2: f64,
    pub order: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergeSummary {
    pub dim: usize,
    pub m: f64,
    pub scheme: String,
    pub mesh_kind: String,
    pub t_end: f64,
    pub levels: Vec<ConvergeLevel>,
}

pub fn converge_csv(summary: &ConvergeSummary) -> String {
    let mut out = String::from("level,N,tau,err_l2,order\n");
    for l in &summary.levels {
        let order = l.order.map(fmt_f64).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            l.level,
            fmt_f64(l.n),
            fmt_f64(l.tau),
            fmt_f64(l.err_l2),
            order
        );
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct MassTableLevel {
    pub n: usize,
    pub tau: f64,
    pub mass_initial: f64,
    pub mass_final: f64,
    pub mass_error: f64,
    pub order: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MassTableSummary {
    pub m: f64,
    pub c: f64,
    pub scheme: String,
    pub t_end: f64,
    pub levels: Vec<MassTableLevel>,
}

pub fn mass_table_csv(summary: &MassTableSummary) -> String {
    let mut out = String::from("N,tau,mass_initial,mass_final,mass_error,order\n");
    for l in &summary.levels {
        let order = l.order.map(fmt_f64).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            l.n,
            fmt_f64(l.tau),
            fmt_f64(l.mass_initial),
            fmt_f64(l.mass_final),
            fmt_f64(l.mass_error),
            order
        );
    }
    out
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serialization cannot fail");
    s.push('\n');
    s
}
