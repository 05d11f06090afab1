use std::fmt::Write as _;
use std::io::{Read, Write};

use super::{BodyState, Sample, SimError, Trajectory, Wind};

const FIXED: [&str; 10] = ["t", "v_par", "v_perp", "phi", "phidot", "w", "zeta", "u_par", "u_perp", "u_phi"];

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the fixed state/wind/control columns followed by a `_true` and a
/// `_noisy` column per sensor channel. Missing samples are empty fields.
pub fn write_csv<W: Write>(traj: &Trajectory, out: W) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = FIXED.iter().map(|s| s.to_string()).collect();
    for c in &traj.channels {
        header.push(format!("{c}_true"));
        header.push(format!("{c}_noisy"));
    }
    let io = |e: csv::Error| SimError::Format(e.to_string());
    w.write_record(&header).map_err(io)?;
    for s in &traj.samples {
        let mut rec = vec![
            s.t.to_string(),
            s.state.v_par.to_string(),
            s.state.v_perp.to_string(),
            s.state.phi.to_string(),
            s.state.phi_dot.to_string(),
            s.wind.w.to_string(),
            s.wind.zeta.to_string(),
        ];
        rec.extend(s.controls.iter().map(|u| u.to_string()));
        for i in 0..traj.channels.len() {
            rec.push(cell(s.truth.get(i).copied().flatten()));
            rec.push(cell(s.noisy.get(i).copied().flatten()));
        }
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| SimError::Format(e.to_string()))
}

/// Reads a trajectory written by [`write_csv`]. World positions are
/// re-integrated with the trapezoidal rule and wind rates are recovered by
/// finite differences, since neither is stored.
pub fn read_csv<R: Read>(input: R) -> Result<Trajectory, SimError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| SimError::Format(e.to_string()))?.clone();
    for (i, name) in FIXED.iter().enumerate() {
        if header.get(i) != Some(*name) {
            return Err(SimError::Format(format!("column {} must be `{name}`", i + 1)));
        }
    }
    let rest: Vec<&str> = header.iter().skip(FIXED.len()).collect();
    if rest.len() % 2 != 0 {
        return Err(SimError::Format("sensor columns must come in true/noisy pairs".into()));
    }
    let mut channels = Vec::new();
    for pair in rest.chunks(2) {
        let label = pair[0]
            .strip_suffix("_true")
            .filter(|l| pair[1].strip_suffix("_noisy") == Some(l))
            .ok_or_else(|| SimError::Format(format!("unexpected sensor columns `{}`, `{}`", pair[0], pair[1])))?;
        channels.push(label.to_string());
    }

    let mut samples: Vec<Sample> = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| SimError::Format(e.to_string()))?;
        let num = |i: usize| -> Result<f64, SimError> {
            rec.get(i).unwrap_or("").trim().parse::<f64>().map_err(|_| {
                SimError::Format(format!("row {}: column `{}` is not a number", line + 2, header.get(i).unwrap_or("?")))
            })
        };
        let opt = |i: usize| -> Result<Option<f64>, SimError> {
            match rec.get(i).unwrap_or("").trim() {
                "" => Ok(None),
                _ => num(i).map(Some),
            }
        };
        let mut truth = Vec::with_capacity(channels.len());
        let mut noisy = Vec::with_capacity(channels.len());
        for k in 0..channels.len() {
            truth.push(opt(FIXED.len() + 2 * k)?);
            noisy.push(opt(FIXED.len() + 2 * k + 1)?);
        }
        samples.push(Sample {
            t: num(0)?,
            state: BodyState::new(num(1)?, num(2)?, num(3)?, num(4)?),
            position: [0.0, 0.0],
            wind: Wind { w: num(5)?, zeta: num(6)?, w_dot: 0.0, zeta_dot: 0.0 },
            controls: [num(7)?, num(8)?, num(9)?],
            truth,
            noisy,
        });
    }
    if samples.len() < 2 {
        return Err(SimError::Format("need at least two samples".into()));
    }
    let dt = samples[1].t - samples[0].t;
    let n = samples.len();
    for k in 0..n {
        let (a, b) = (k.saturating_sub(1), (k + 1).min(n - 1));
        let span = samples[b].t - samples[a].t;
        samples[k].wind.w_dot = (samples[b].wind.w - samples[a].wind.w) / span;
        samples[k].wind.zeta_dot = (samples[b].wind.zeta - samples[a].wind.zeta) / span;
    }
    let ground = |s: &Sample| {
        let (sn, c) = s.state.phi.sin_cos();
        [s.state.v_par * c - s.state.v_perp * sn, s.state.v_par * sn + s.state.v_perp * c]
    };
    for k in 1..n {
        let h = samples[k].t - samples[k - 1].t;
        let (g0, g1) = (ground(&samples[k - 1]), ground(&samples[k]));
        let p = samples[k - 1].position;
        samples[k].position = [p[0] + 0.5 * h * (g0[0] + g1[0]), p[1] + 0.5 * h * (g0[1] + g1[1])];
    }
    Ok(Trajectory { dt, channels, samples })
}

/// A gnuplot script plotting the world-frame path (embedded) and the
/// state/wind time series read from `csv_path`.
pub fn gnuplot_script(traj: &Trajectory, csv_path: &str, title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# gnuplot -p this_file");
    let _ = writeln!(s, "$path << EOD");
    let stride = (traj.len() / 2000).max(1);
    for smp in traj.samples.iter().step_by(stride) {
        let _ = writeln!(s, "{} {} {}", smp.position[0], smp.position[1], smp.state.phi);
    }
    let _ = writeln!(s, "EOD");
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set multiplot layout 2,2 title '{}'", title.replace('\'', ""));
    let _ = writeln!(s, "set title 'path'\nset size ratio -1\nplot $path using 1:2 with lines notitle");
    let _ = writeln!(s, "set size noratio");
    let _ = writeln!(
        s,
        "set title 'velocity'\nplot '{csv_path}' using 1:2 with lines title 'v_par', '' using 1:3 with lines title 'v_perp'"
    );
    let _ = writeln!(
        s,
        "set title 'heading'\nplot '{csv_path}' using 1:4 with lines title 'phi', '' using 1:5 with lines title 'phidot'"
    );
    let _ = writeln!(
        s,
        "set title 'wind'\nplot '{csv_path}' using 1:6 with lines title 'w', '' using 1:7 with lines title 'zeta'"
    );
    let _ = writeln!(s, "unset multiplot");
    s
}
