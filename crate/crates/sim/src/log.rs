use std::io::Write;

use nalgebra::UnitQuaternion;

use crate::robot::SimRobot;

const BASE_COLUMNS: [&str; 13] = [
    "base_x", "base_y", "base_z", "base_qw", "base_qx", "base_qy", "base_qz", "base_vx", "base_vy", "base_vz",
    "base_wx", "base_wy", "base_wz",
];

/// CSV trajectory: `time`, then `<joint>_pos,<joint>_vel,<joint>_tau` for
/// each logged joint in canonical order, then for floating models the base
/// pose (position, quaternion `w x y z`) and base twist (`ṗ`, `ω`).
pub struct TrajectoryLogger<W: Write> {
    writer: csv::Writer<W>,
    dofs: Vec<usize>,
    floating: bool,
    decimation: usize,
    count: usize,
}

impl<W: Write> TrajectoryLogger<W> {
    /// Logs `joints` (any order, sorted canonically) every `decimation` records.
    pub fn new(writer: W, sim: &SimRobot, joints: &[String], decimation: usize) -> csv::Result<Self> {
        let model = sim.model();
        let mut dofs: Vec<usize> = joints
            .iter()
            .map(|j| model.dof_index(j).ok_or_else(|| csv::Error::from(std::io::Error::other(format!("unknown joint `{j}`")))))
            .collect::<Result<_, _>>()?;
        dofs.sort_unstable();
        dofs.dedup();
        let mut writer = csv::Writer::from_writer(writer);
        let mut header = vec!["time".to_string()];
        for &d in &dofs {
            let name = &model.dof_joint(d).name;
            header.extend([format!("{name}_pos"), format!("{name}_vel"), format!("{name}_tau")]);
        }
        let floating = model.is_floating();
        if floating {
            header.extend(BASE_COLUMNS.iter().map(|c| c.to_string()));
        }
        writer.write_record(&header)?;
        Ok(Self { writer, dofs, floating, decimation: decimation.max(1), count: 0 })
    }

    pub fn columns(&self) -> usize {
        1 + 3 * self.dofs.len() + if self.floating { BASE_COLUMNS.len() } else { 0 }
    }

    /// Writes the current state unless decimated away.
    pub fn record(&mut self, sim: &SimRobot) -> csv::Result<()> {
        let due = self.count.is_multiple_of(self.decimation);
        self.count += 1;
        if !due {
            return Ok(());
        }
        let s = sim.state();
        let tau = sim.applied_torques();
        let mut row = Vec::with_capacity(self.columns());
        row.push(s.time);
        for &d in &self.dofs {
            row.extend([s.q.joint_positions[d], s.nu.joint_velocities[d], tau[d]]);
        }
        if self.floating {
            let quat = UnitQuaternion::from_matrix(s.q.base_rotation.matrix());
            row.extend(s.q.base_position.iter());
            row.extend([quat.w, quat.i, quat.j, quat.k]);
            row.extend(s.nu.base_linear.iter().chain(s.nu.base_angular.iter()));
        }
        self.writer.write_record(row.iter().map(|v| v.to_string()))
    }

    pub fn flush(&mut self) -> std::io::Result<()> {
        self.writer.flush()
    }

    pub fn into_inner(self) -> Result<W, std::io::Error> {
        self.writer.into_inner().map_err(|e| e.into_error())
    }
}
