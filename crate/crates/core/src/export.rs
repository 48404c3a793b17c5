//! CSV writers for solved fields, trajectories and sweep results.
//!
//! Floats are written in Rust's shortest round-trip decimal form.

use std::io::Write;

use crate::dynamics::SwarmState;
use crate::experiment::ExperimentResult;
use crate::scent::ScentField;

pub const FIELD_HEADER: [&str; 8] = ["cell_i", "cell_j", "x_center", "y_center", "fluid_flag", "U", "dUdx", "dUdy"];
pub const TRAJECTORY_HEADER: [&str; 6] = ["t", "particle_id", "x", "y", "vx", "vy"];
pub const RESULTS_HEADER: [&str; 6] = ["N", "trials", "failure_count", "presuccess_count", "success_count", "success_probability"];
pub const TRIALS_HEADER: [&str; 7] = ["N", "trial_index", "seed", "outcome", "final_center_x", "final_center_y", "components"];

fn num(x: f64) -> String {
    format!("{x}")
}

/// One row per grid cell, solid cells included with `fluid_flag = 0`.
pub fn write_field_csv<W: Write>(field: &ScentField, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FIELD_HEADER)?;
    let (nx, ny) = field.dims();
    for j in 0..ny {
        for i in 0..nx {
            let c = field.cell_center(i, j);
            let g = field.cell_gradient(i, j);
            w.write_record([
                i.to_string(),
                j.to_string(),
                num(c.x),
                num(c.y),
                u8::from(field.is_fluid(i, j)).to_string(),
                num(field.value(i, j)),
                num(g.x),
                num(g.y),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_trajectory_csv<W: Write>(frames: &[SwarmState], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_HEADER)?;
    for s in frames {
        for (id, (p, v)) in s.positions.iter().zip(&s.velocities).enumerate() {
            w.write_record([num(s.time), id.to_string(), num(p.x), num(p.y), num(v.x), num(v.y)])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_results_csv<W: Write>(result: &ExperimentResult, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER)?;
    for r in &result.rows {
        w.write_record([
            r.n_fish.to_string(),
            r.trials.to_string(),
            r.failure.to_string(),
            r.pre_success.to_string(),
            r.success.to_string(),
            num(r.success_probability()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trials_csv<W: Write>(result: &ExperimentResult, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRIALS_HEADER)?;
    for t in &result.trials {
        w.write_record([
            t.n_fish.to_string(),
            t.trial_index.to_string(),
            t.seed.to_string(),
            t.outcome.outcome.as_str().to_string(),
            num(t.outcome.final_center.x),
            num(t.outcome.final_center.y),
            t.outcome.final_components.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::SweepRow;
    use crate::geometry::Vec2;

    #[test]
    fn results_csv_layout() {
        let result = ExperimentResult {
            rows: vec![SweepRow { n_fish: 5, trials: 3, failure: 1, pre_success: 0, success: 2 }],
            trials: vec![],
        };
        let mut buf = Vec::new();
        write_results_csv(&result, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "N,trials,failure_count,presuccess_count,success_count,success_probability\n5,3,1,0,2,0.6666666666666666\n"
        );
    }

    #[test]
    fn trajectory_floats_round_trip() {
        let mut s = SwarmState::at_rest(vec![Vec2::new(0.1 + 0.2, 1.0 / 3.0), Vec2::new(2.0, 1e-7)]);
        s.time = 0.07;
        let mut buf = Vec::new();
        write_trajectory_csv(&[s.clone()], &mut buf).unwrap();
        let mut rdr = csv::Reader::from_reader(buf.as_slice());
        let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0][2].parse::<f64>().unwrap(), s.positions[0].x);
        assert_eq!(rows[0][3].parse::<f64>().unwrap(), s.positions[0].y);
        assert_eq!(rows[1][3].parse::<f64>().unwrap(), 1e-7);
    }
}
