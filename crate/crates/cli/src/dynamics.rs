use std::io::Write;
use std::path::PathBuf;

use nalgebra::DMatrix;
use wbc_core::dynamics::{self, GravityField};
use wbc_core::{load_model, BaseKind, RobotVelocity};

use crate::error::CliError;

pub struct Request {
    pub model: PathBuf,
    pub q: Option<Vec<f64>>,
    pub nu: Option<Vec<f64>>,
    pub frame: Option<String>,
    pub zero_gravity: bool,
    pub floating: bool,
}

fn write_rows(out: &mut impl Write, m: &DMatrix<f64>) -> std::io::Result<()> {
    for r in 0..m.nrows() {
        let row: Vec<String> = m.row(r).iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

fn write_vector(out: &mut impl Write, v: &[f64]) -> std::io::Result<()> {
    let row: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    writeln!(out, "{}", row.join(","))
}

pub fn command(req: &Request, out: &mut impl Write) -> Result<(), CliError> {
    let base = if req.floating { BaseKind::Floating } else { BaseKind::Fixed };
    let model = load_model(&req.model, base).map_err(|e| CliError::config("model", e))?;
    let names = model.canonical_joint_order();
    let n = names.len();
    let mut q = model.neutral_configuration();
    if let Some(values) = &req.q {
        if values.len() != n {
            return Err(CliError::config("--q", format!("expected {n} values ({}), got {}", names.join(", "), values.len())));
        }
        q.joint_positions = values.clone();
    }
    let mut nu = RobotVelocity::zeros(n);
    if let Some(values) = &req.nu {
        if values.len() != n {
            return Err(CliError::config("--nu", format!("expected {n} values ({}), got {}", names.join(", "), values.len())));
        }
        nu.joint_velocities = values.clone();
    }
    if let Some(frame) = &req.frame {
        if model.link_index(frame).is_none() {
            return Err(CliError::config("--frame", format!("unknown frame `{frame}`")));
        }
    }
    let gravity = if req.zero_gravity { GravityField::zero() } else { GravityField::default() };

    let m = dynamics::mass_matrix(&model, &q).map_err(CliError::runtime)?;
    let g = dynamics::gravity_bias(&model, &q, &gravity).map_err(CliError::runtime)?;
    let h = dynamics::bias_forces(&model, &q, &nu, &gravity).map_err(CliError::runtime)?;

    let mut coordinates: Vec<String> = Vec::new();
    if model.is_floating() {
        coordinates.extend(["base_vx", "base_vy", "base_vz", "base_wx", "base_wy", "base_wz"].map(String::from));
    }
    coordinates.extend(names);
    writeln!(out, "[coordinates]")?;
    writeln!(out, "{}", coordinates.join(","))?;
    writeln!(out, "[mass_matrix]")?;
    write_rows(out, &m)?;
    writeln!(out, "[gravity_bias]")?;
    write_vector(out, g.as_slice())?;
    writeln!(out, "[bias_forces]")?;
    write_vector(out, h.as_slice())?;
    if let Some(frame) = &req.frame {
        let j = dynamics::frame_jacobian(&model, &q, frame).map_err(CliError::runtime)?;
        writeln!(out, "[jacobian {frame}]")?;
        write_rows(out, &j.matrix)?;
    }
    Ok(())
}
