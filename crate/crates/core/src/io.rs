//! CSV and JSON artifacts.
//!
//! Every CSV file gets a JSON sidecar with the same stem. Numbers are written
//! with Rust's shortest round-trip formatting so repeated runs produce
//! byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::evolution::{CellGrid, FieldState};
use crate::geometry::SurfaceProfile;
use crate::scalar::Real;
use crate::stationary::StationarySolution;

/// `dir/stem.json` next to `dir/stem.csv`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn num<T: Real>(x: T) -> String {
    format!("{}", x.to_f64_lossy())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn with_hash(mut value: Value, config_hash: Option<&str>) -> Value {
    if let (Some(h), Value::Object(map)) = (config_hash, &mut value) {
        map.insert("config_hash".into(), Value::String(h.to_string()));
    }
    value
}

/// Solution profile `(r, phi)` plus sidecar `{l, omega, action, residual_norm, exponents, ...}`.
pub fn write_solution<T: Real>(path: &Path, solution: &StationarySolution<T>, config_hash: Option<&str>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["r", "phi"])?;
    for (r, p) in solution.r.iter().zip(&solution.phi) {
        w.write_record([num(*r), num(*p)])?;
    }
    w.flush()?;
    let exponents = solution.exponents.map(|e| {
        json!({
            "a_left": e.a_left.to_f64_lossy(),
            "p_left": e.p_left.to_f64_lossy(),
            "a_right": e.a_right.to_f64_lossy(),
            "p_right": e.p_right.to_f64_lossy(),
        })
    });
    let meta = json!({
        "l": solution.l,
        "omega": solution.omega.to_f64_lossy(),
        "action": solution.action.to_f64_lossy(),
        "residual_norm": solution.residual_norm.to_f64_lossy(),
        "exponents": exponents,
        "converged": solution.converged,
        "iterations": solution.iterations,
        "start_actions": solution.start_actions.iter().map(|a| a.to_f64_lossy()).collect::<Vec<_>>(),
        "cells": solution.cells(),
        "surface": solution.surface.name(),
    });
    write_json(&sidecar_path(path), &with_hash(meta, config_hash))
}

/// Snapshot `(r, u1, u2, u3, v1, v2, v3)` plus sidecar `{t, l, N, R}`.
pub fn write_snapshot<T: Real>(path: &Path, state: &FieldState<T>, config_hash: Option<&str>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["r", "u1", "u2", "u3", "v1", "v2", "v3"])?;
    for i in 0..state.cells() {
        let (u, v) = (&state.u[i], &state.v[i]);
        w.write_record([num(state.grid.r[i]), num(u[0]), num(u[1]), num(u[2]), num(v[0]), num(v[1]), num(v[2])])?;
    }
    w.flush()?;
    let meta = json!({
        "t": state.t.to_f64_lossy(),
        "l": state.l(),
        "N": state.cells(),
        "R": state.grid.extent.to_f64_lossy(),
    });
    write_json(&sidecar_path(path), &with_hash(meta, config_hash))
}

/// Reads a snapshot written by [`write_snapshot`] onto the cell grid of `surface`.
pub fn read_snapshot(path: &Path, surface: &SurfaceProfile<f64>) -> Result<FieldState<f64>> {
    let meta: Value = serde_json::from_reader(File::open(sidecar_path(path))?)?;
    let field = |k: &str| meta.get(k).cloned().ok_or_else(|| Error::InvalidInput(format!("snapshot sidecar lacks {k}")));
    let t = field("t")?.as_f64().ok_or_else(|| Error::InvalidInput("t".into()))?;
    let l = field("l")?.as_u64().ok_or_else(|| Error::InvalidInput("l".into()))? as u32;
    let cells = field("N")?.as_u64().ok_or_else(|| Error::InvalidInput("N".into()))? as usize;
    let mut rdr = csv::Reader::from_path(path)?;
    let mut u = Vec::with_capacity(cells);
    let mut v = Vec::with_capacity(cells);
    for row in rdr.deserialize() {
        let (_r, u1, u2, u3, v1, v2, v3): (f64, f64, f64, f64, f64, f64, f64) = row?;
        u.push([u1, u2, u3]);
        v.push([v1, v2, v3]);
    }
    let grid = Arc::new(CellGrid::new(surface, cells, l)?);
    FieldState::new(grid, u, v, t)
}

/// Series CSV with header `t, E, Q, D, G, identity_residual, X, flux, dist`;
/// `dist` is empty when no reference orbit was configured.
pub fn write_series<T: Real>(path: &Path, records: &[DiagnosticsRecord<T>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "E", "Q", "D", "G", "identity_residual", "X", "flux", "dist"])?;
    for r in records {
        w.write_record([
            num(r.t),
            num(r.energy),
            num(r.charge),
            num(r.d),
            num(r.g),
            num(r.identity_residual),
            num(r.x),
            num(r.flux),
            r.dist.map(num).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads back the numeric columns of a series file (empty `dist` becomes NaN).
pub fn read_series(path: &Path) -> Result<Vec<[f64; 9]>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let mut vals = [f64::NAN; 9];
        for (k, field) in row.iter().enumerate().take(9) {
            if !field.is_empty() {
                vals[k] = field.parse().map_err(|_| Error::InvalidInput(format!("bad number {field:?}")))?;
            }
        }
        out.push(vals);
    }
    Ok(out)
}

/// Writes `value` merged with the config hash.
pub fn write_summary(path: &Path, value: Value, config_hash: Option<&str>) -> Result<()> {
    write_json(path, &with_hash(value, config_hash))
}
