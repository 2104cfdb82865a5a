use std::io::Write;

use nalgebra::DVector;
use rand::Rng;
use wbc_core::dynamics::{self, GeneralizedVector, GravityField};
use wbc_core::{fixtures, parse_urdf, BaseKind, ModelError, RobotConfiguration, RobotVelocity};
use wbc_testkit::{
    double_pendulum, jacobian_error, pendulum_energy_drift, random_chain, random_configuration, random_vector,
    random_velocity, rng, round_trip_error,
};

use crate::error::CliError;

pub const DEFAULT_SEED: u64 = 2015;

struct Check {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn models() -> Vec<(String, wbc_core::MultibodyModel)> {
    let mut out = Vec::new();
    for (name, doc) in fixtures::ALL {
        for base in [BaseKind::Fixed, BaseKind::Floating] {
            out.push((format!("{name}/{base:?}"), parse_urdf(doc, base).expect("bundled fixture")));
        }
    }
    out
}

fn mass_matrix_symmetry(seed: u64) -> Result<Check, dynamics::DynamicsError> {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    let mut not_pd = Vec::new();
    for (name, model) in models() {
        for _ in 0..10 {
            let q = random_configuration(&mut r, &model);
            let m = dynamics::mass_matrix(&model, &q)?;
            worst = worst.max((&m - m.transpose()).amax());
            if m.nrows() > 0 && m.clone().cholesky().is_none() {
                not_pd.push(name.clone());
            }
        }
    }
    not_pd.dedup();
    let detail = if not_pd.is_empty() {
        format!("max |M - Mt| = {worst:e}")
    } else {
        format!("not positive definite: {}", not_pd.join(" "))
    };
    Ok(check("mass_matrix_symmetry", worst <= 1e-12 && not_pd.is_empty(), detail))
}

fn lagrangian_oracle(seed: u64) -> Result<Check, dynamics::DynamicsError> {
    let model = parse_urdf(fixtures::DOUBLE_PENDULUM, BaseKind::Fixed).expect("bundled fixture");
    let g = GravityField::default();
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let q = [r.random_range(-3.0..3.0), r.random_range(-3.0..3.0)];
        let dq = [r.random_range(-2.0..2.0), r.random_range(-2.0..2.0)];
        let config = RobotConfiguration::from_joints(q.to_vec());
        let m = dynamics::mass_matrix(&model, &config)?;
        let gq = dynamics::gravity_bias(&model, &config, &g)?;
        let c = dynamics::bias_forces(&model, &config, &RobotVelocity::from_joints(dq.to_vec()), &GravityField::zero())?;
        worst = worst
            .max((m - double_pendulum::mass_matrix(q)).amax())
            .max((gq.as_vector() - double_pendulum::gravity(q, 9.81)).amax())
            .max((c.as_vector() - double_pendulum::coriolis(q, dq)).amax());
    }
    Ok(check("lagrangian_oracle", worst <= 1e-9, format!("max error {worst:e}")))
}

fn round_trip(seed: u64) -> Result<Check, dynamics::DynamicsError> {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for trial in 0..100 {
        let base = if trial % 2 == 0 { BaseKind::Fixed } else { BaseKind::Floating };
        let model = random_chain(&mut r, 1 + trial % 6, base);
        let q = random_configuration(&mut r, &model);
        let nu = random_velocity(&mut r, &model, 1.5);
        let acc = DVector::from_vec(random_vector(&mut r, model.velocity_dim(), 2.0));
        let acc = GeneralizedVector::from_vector(model.is_floating(), acc);
        worst = worst.max(round_trip_error(&model, &q, &nu, &acc, &GravityField::default())?);
    }
    Ok(check("fd_id_round_trip", worst <= 1e-8, format!("max |nu_dot error| {worst:e}")))
}

fn jacobian(seed: u64) -> Result<Check, dynamics::DynamicsError> {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for (_, model) in models() {
        for _ in 0..10 {
            let q = random_configuration(&mut r, &model);
            let nu = random_velocity(&mut r, &model, 1.0);
            worst = worst.max(jacobian_error(&model, &q, &nu)?);
        }
    }
    Ok(check("jacobian_finite_difference", worst <= 1e-6, format!("max twist error {worst:e}")))
}

fn energy() -> Check {
    let coarse = pendulum_energy_drift(1e-3, 10.0);
    let fine = pendulum_energy_drift(5e-4, 10.0);
    let ratio = coarse / fine;
    let passed = coarse < 1e-2 && (1.6..=2.4).contains(&ratio);
    check("energy_drift", passed, format!("relative drift {coarse:e} at 1 ms, ratio {ratio:.3} on halving"))
}

fn corrupted_fixture() -> Check {
    match parse_urdf(fixtures::CORRUPTED_INERTIA, BaseKind::Fixed) {
        Err(e @ ModelError::InvalidInertia { .. }) => check("corrupted_inertia_rejected", true, e.to_string()),
        Err(e) => check("corrupted_inertia_rejected", false, format!("rejected for the wrong reason: {e}")),
        Ok(_) => check("corrupted_inertia_rejected", false, "accepted".into()),
    }
}

pub fn command(seed: u64, out: &mut impl Write) -> Result<(), CliError> {
    let checks = [
        mass_matrix_symmetry(seed),
        lagrangian_oracle(seed + 1),
        round_trip(seed + 2),
        jacobian(seed + 3),
        Ok(energy()),
        Ok(corrupted_fixture()),
    ];
    let mut failed = Vec::new();
    for c in checks {
        let c = c.map_err(CliError::runtime)?;
        writeln!(out, "{} {} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
        if !c.passed {
            failed.push(c.name.to_string());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verify(failed))
    }
}
