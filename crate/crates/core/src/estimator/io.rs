use std::io::Write;

use super::FilterRun;

/// Writes `t`, the mean of every state, their marginal standard deviations
/// (`<state>_std`) and the innovation norm (empty when no channel was used).
pub fn write_estimates<W: Write>(run: &FilterRun, out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend(run.states.iter().cloned());
    header.extend(run.states.iter().map(|s| format!("{s}_std")));
    header.push("innovation_norm".into());
    w.write_record(&header)?;
    for e in &run.estimates {
        let mut rec = vec![e.t.to_string()];
        rec.extend(e.mean.iter().map(|v| v.to_string()));
        rec.extend(e.std.iter().map(|v| v.to_string()));
        rec.push(e.innovation_norm.map(|v| v.to_string()).unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()
}
