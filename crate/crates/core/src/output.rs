//! File formats. Headers and JSON keys are part of the interface; bump
//! [`SCHEMA_VERSION`] when they change.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::diagnostics::DiagnosticsRecord;
use crate::gas::GasParams;
use crate::period_map::TraceRow;
use crate::scheme::Layer;

pub const SCHEMA_VERSION: u32 = 1;

pub const LAYERS_HEADER: &str = "n,j,x,rho,m,z,w,I,lo,hi";
pub const TRACE_HEADER: &str = "iteration,residual,contraction_factor,mass,energy";
pub const SWEEP_HEADER: &str = "value,residual,mass_drift,min_band_margin,runtime_s";
pub const SUMMARY_HEADER: &str = "n_x,n_t,dx,dt,mass_initial,mass_final,mass_drift_rel,energy_initial,energy_final,\
L_total,min_band_margin,cut_nodes_total,warnings";

/// 17 significant digits, enough to round-trip an `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn create(path: &Path) -> io::Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new)
}

pub fn write_layer_rows<W: Write>(out: &mut W, layer: &Layer<f64>, gp: &GasParams<f64>) -> io::Result<()> {
    for (k, u) in layer.values.iter().enumerate() {
        let p = gp.to_invariants(u);
        let j = layer.indices[k];
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            layer.level,
            j,
            num(layer.grid.x(j)),
            num(u.rho),
            num(u.m),
            num(p.z),
            num(p.w),
            num(layer.i_vals[k]),
            num(layer.lo[k]),
            num(layer.hi[k])
        )?;
    }
    Ok(())
}

pub fn write_trace<W: Write>(out: &mut W, rows: &[TraceRow]) -> io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.iteration,
            num(r.residual),
            num(r.contraction_factor),
            num(r.mass),
            num(r.energy)
        )?;
    }
    Ok(())
}

pub fn write_jsonl<W: Write>(out: &mut W, records: &[DiagnosticsRecord]) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut *out, r)?;
        writeln!(out)?;
    }
    Ok(())
}

/// `certificate.json` of a periodic run.
#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub schema_version: u32,
    pub converged: bool,
    pub diverged: bool,
    pub iterations: usize,
    pub residual: f64,
    pub tol: f64,
    pub omega: f64,
    pub contraction_factor: f64,
    pub band_margin_min_start: f64,
    pub band_margin_min_end: f64,
    pub band_ok: bool,
    pub mass: f64,
    pub rho_bar: f64,
    pub mass_ok: bool,
    /// Sup-norm distance in `(ρ, m)` between the decoded levels 0 and `2N_t`.
    pub periodicity_sup: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub residual: f64,
    pub mass_drift: f64,
    pub min_band_margin: f64,
    pub runtime_s: f64,
}

pub fn write_sweep<W: Write>(out: &mut W, rows: &[SweepRow]) -> io::Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            num(r.value),
            num(r.residual),
            num(r.mass_drift),
            num(r.min_band_margin),
            num(r.runtime_s)
        )?;
    }
    Ok(())
}
