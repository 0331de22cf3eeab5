//! Deterministic CSV emission: 17 significant digits, `.` decimal separator,
//! `\n` line endings. Re-running the same inputs byte-reproduces the files.

use crate::integrate::Trajectory;
use crate::reparam::STrajectory;
use crate::uniqueness::EnergyTrace;
use std::io::{self, Write};

/// Fixed float rendering used by every CSV column.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Header `t,u_1..u_K,v_1..v_K,s,energy`, one row per sample.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, out: &mut W) -> io::Result<()> {
    let k = traj.operator.dim();
    let mut header = String::from("t");
    for i in 1..=k {
        header.push_str(&format!(",u_{i}"));
    }
    for i in 1..=k {
        header.push_str(&format!(",v_{i}"));
    }
    header.push_str(",s,energy");
    writeln!(out, "{header}")?;
    let s_vals = traj.s_values();
    let energies = traj.energies();
    for (i, st) in traj.samples.iter().enumerate() {
        let mut row = format_float(st.time);
        for c in st.position.iter() {
            row.push(',');
            row.push_str(&format_float(*c));
        }
        for c in st.velocity.iter() {
            row.push(',');
            row.push_str(&format_float(*c));
        }
        row.push(',');
        row.push_str(&format_float(s_vals[i]));
        row.push(',');
        row.push_str(&format_float(energies[i]));
        writeln!(out, "{row}")?;
    }
    Ok(())
}

/// Header `s,t,d,z_1..z_K,w_1..w_K`, one row per state.
pub fn write_strajectory_csv<W: Write>(traj: &STrajectory, out: &mut W) -> io::Result<()> {
    let k = traj.states.first().map(|st| st.z.len()).unwrap_or(0);
    let mut header = String::from("s,t,d");
    for i in 1..=k {
        header.push_str(&format!(",z_{i}"));
    }
    for i in 1..=k {
        header.push_str(&format!(",w_{i}"));
    }
    writeln!(out, "{header}")?;
    for (i, st) in traj.states.iter().enumerate() {
        let mut row = format_float(st.s);
        row.push(',');
        row.push_str(&format_float(traj.recovered_time[i]));
        row.push(',');
        row.push_str(&format_float(traj.denom[i]));
        for c in st.z.iter() {
            row.push(',');
            row.push_str(&format_float(*c));
        }
        for c in st.w.iter() {
            row.push(',');
            row.push_str(&format_float(*c));
        }
        writeln!(out, "{row}")?;
    }
    Ok(())
}

/// Header `s,E,I1,I2,I3,eta1,eta2,residual`, one row per grid point.
pub fn write_energy_trace_csv<W: Write>(trace: &EnergyTrace, out: &mut W) -> io::Result<()> {
    writeln!(out, "s,E,I1,I2,I3,eta1,eta2,residual")?;
    for i in 0..trace.s.len() {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            format_float(trace.s[i]),
            format_float(trace.e[i]),
            format_float(trace.i1[i]),
            format_float(trace.i2[i]),
            format_float(trace.i3[i]),
            format_float(trace.eta1[i]),
            format_float(trace.eta2[i]),
            format_float(trace.residual[i]),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::{integrate, IntegratorConfig, Scheme};
    use crate::scenarios;

    #[test]
    fn trajectory_csv_is_reproducible() {
        let fx = scenarios::linear_cos();
        let cfg = IntegratorConfig::new(Scheme::StormerVerlet, 1e-3, 0.1, 10).unwrap();
        let traj = integrate(&fx.operator, &fx.nonlinearity, &fx.u0, &fx.u1, &cfg).unwrap();
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_trajectory_csv(&traj, &mut a).unwrap();
        write_trajectory_csv(&traj, &mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,u_1,v_1,s,energy");
        assert!(text.ends_with('\n'));
        assert!(!text.contains('\r'));
        // 17 significant digits in scientific notation.
        assert!(lines.next().unwrap().starts_with("0.0000000000000000e0,1.0000000000000000e0"));
    }
}
