//! Plain-text artifact formats.
//!
//! All tables are tab-separated with `#` header lines carrying a format tag
//! and version. Floats are written in Rust's shortest round-trip notation,
//! so every table reads back bit-identically.
//!
//! | file              | tag                    | columns                                   |
//! |-------------------|------------------------|-------------------------------------------|
//! | policy            | `symmfg policy v1`     | `step state action value`                 |
//! | per-agent policy  | `symmfg profile v1`    | `agent step state action value`           |
//! | Q-table           | `symmfg qtable v1`     | `step state action value`                 |
//! | grid function     | `symmfg grid v1`       | `count_0 .. count_{C-1} value_0 .. value_{D-1}` |
//! | trajectory dump   | `symmfg trajectory v1` | `episode step agent state action reward`  |
//! | metric trace      | (header row only)      | see [`TRACE_COLUMNS`]                      |

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::learn::MetricRow;
use crate::policy::{Policy, QTable};
use crate::sim::Trajectory;
use crate::symmetry::GridFunction;

pub const TRACE_COLUMNS: [&str; 9] = [
    "epoch",
    "samples_consumed",
    "mfg_exploitability",
    "mfg_exploitability_normalized",
    "nplayer_exploitability_mean",
    "nplayer_exploitability_stderr",
    "nplayer_exploitability_mean_normalized",
    "nplayer_exploitability_stderr_normalized",
    "wall_time_s",
];

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Data lines of a table, numbered from 1, with header comments collected.
struct Table<'a> {
    headers: Vec<(usize, &'a str)>,
    rows: Vec<(usize, Vec<&'a str>)>,
}

fn read_table(text: &str) -> Table<'_> {
    let mut headers = Vec::new();
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            headers.push((i + 1, rest.trim()));
        } else {
            rows.push((i + 1, line.split('\t').collect()));
        }
    }
    Table { headers, rows }
}

fn expect_tag(table: &Table<'_>, tag: &str) -> Result<()> {
    match table.headers.first() {
        Some((_, h)) if *h == tag => Ok(()),
        Some((line, h)) => Err(parse_err(*line, format!("expected header `# {tag}`, found `# {h}`"))),
        None => Err(parse_err(1, format!("missing header `# {tag}`"))),
    }
}

/// Parses `key value key value ...` from the second header line.
fn header_fields(table: &Table<'_>, keys: &[&str]) -> Result<Vec<String>> {
    let (line, text) = table
        .headers
        .get(1)
        .ok_or_else(|| parse_err(2, "missing shape header"))?;
    let tokens: Vec<&str> = text.split_whitespace().collect();
    keys.iter()
        .map(|k| {
            tokens
                .iter()
                .position(|t| t == k)
                .and_then(|p| tokens.get(p + 1))
                .map(|v| v.to_string())
                .ok_or_else(|| parse_err(*line, format!("missing `{k}` in shape header")))
        })
        .collect()
}

fn parse_num<T: std::str::FromStr>(line: usize, field: &str) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("cannot parse `{field}`")))
}

fn shape_from(table: &Table<'_>, keys: &[&str]) -> Result<Vec<usize>> {
    let line = table.headers.get(1).map_or(2, |h| h.0);
    header_fields(table, keys)?.iter().map(|v| parse_num(line, v)).collect()
}

/// Reads `(h, s, a, value)` rows into a dense `[h][s][a]` table, requiring
/// every entry exactly once.
fn read_hsa(rows: &[(usize, Vec<&str>)], skip: usize, hz: usize, ns: usize, na: usize) -> Result<Vec<f64>> {
    let mut values = vec![f64::NAN; hz * ns * na];
    let mut seen = vec![false; values.len()];
    for (line, fields) in rows {
        if fields.len() != skip + 4 {
            return Err(parse_err(*line, format!("expected {} columns, found {}", skip + 4, fields.len())));
        }
        let h: usize = parse_num(*line, fields[skip])?;
        let s: usize = parse_num(*line, fields[skip + 1])?;
        let a: usize = parse_num(*line, fields[skip + 2])?;
        if h >= hz || s >= ns || a >= na {
            return Err(parse_err(*line, "index out of range"));
        }
        let idx = (h * ns + s) * na + a;
        if seen[idx] {
            return Err(parse_err(*line, "duplicate entry"));
        }
        seen[idx] = true;
        values[idx] = parse_num(*line, fields[skip + 3])?;
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(parse_err(
            rows.last().map_or(1, |r| r.0),
            format!("missing entry for step {}, state {}, action {}", missing / (ns * na), missing / na % ns, missing % na),
        ));
    }
    Ok(values)
}

fn write_hsa(out: &mut String, prefix: &str, hz: usize, ns: usize, na: usize, value: impl Fn(usize, usize, usize) -> f64) {
    use std::fmt::Write as _;
    for h in 0..hz {
        for s in 0..ns {
            for a in 0..na {
                let _ = writeln!(out, "{prefix}{h}\t{s}\t{a}\t{}", value(h, s, a));
            }
        }
    }
}

pub fn policy_to_string(pi: &Policy) -> String {
    let (hz, ns, na) = (pi.horizon(), pi.n_states(), pi.n_actions());
    let mut out = format!("# symmfg policy v1\n# horizon {hz} states {ns} actions {na}\n# step\tstate\taction\tvalue\n");
    write_hsa(&mut out, "", hz, ns, na, |h, s, a| pi.row(h, s)[a]);
    out
}

pub fn policy_from_str(text: &str) -> Result<Policy> {
    let table = read_table(text);
    expect_tag(&table, "symmfg policy v1")?;
    let shape = shape_from(&table, &["horizon", "states", "actions"])?;
    let values = read_hsa(&table.rows, 0, shape[0], shape[1], shape[2])?;
    Policy::from_table(shape[0], shape[1], shape[2], values)
}

pub fn profile_to_string(policies: &[Policy]) -> Result<String> {
    let first = policies.first().ok_or(Error::EmptyProfile)?;
    let (hz, ns, na) = (first.horizon(), first.n_states(), first.n_actions());
    let mut out = format!(
        "# symmfg profile v1\n# agents {} horizon {hz} states {ns} actions {na}\n# agent\tstep\tstate\taction\tvalue\n",
        policies.len()
    );
    for (i, pi) in policies.iter().enumerate() {
        if !pi.same_shape(first) {
            return Err(Error::ShapeMismatch(format!("policy of agent {i} differs in shape")));
        }
        write_hsa(&mut out, &format!("{i}\t"), hz, ns, na, |h, s, a| pi.row(h, s)[a]);
    }
    Ok(out)
}

pub fn profile_from_str(text: &str) -> Result<Vec<Policy>> {
    let table = read_table(text);
    expect_tag(&table, "symmfg profile v1")?;
    let shape = shape_from(&table, &["agents", "horizon", "states", "actions"])?;
    let (n, hz, ns, na) = (shape[0], shape[1], shape[2], shape[3]);
    let mut per_agent: Vec<Vec<(usize, Vec<&str>)>> = vec![Vec::new(); n];
    for (line, fields) in &table.rows {
        let i: usize = parse_num(*line, fields.first().copied().unwrap_or(""))?;
        if i >= n {
            return Err(parse_err(*line, "agent index out of range"));
        }
        per_agent[i].push((*line, fields.clone()));
    }
    per_agent
        .iter()
        .map(|rows| Policy::from_table(hz, ns, na, read_hsa(rows, 1, hz, ns, na)?))
        .collect()
}

pub fn qtable_to_string(q: &QTable) -> String {
    let (hz, ns, na) = (q.horizon(), q.n_states(), q.n_actions());
    let mut out = format!(
        "# symmfg qtable v1\n# horizon {hz} states {ns} actions {na} tau {}\n# step\tstate\taction\tvalue\n",
        q.tau
    );
    write_hsa(&mut out, "", hz, ns, na, |h, s, a| q.get(h, s, a));
    out
}

pub fn qtable_from_str(text: &str) -> Result<QTable> {
    let table = read_table(text);
    expect_tag(&table, "symmfg qtable v1")?;
    let shape = shape_from(&table, &["horizon", "states", "actions"])?;
    let tau_field = header_fields(&table, &["tau"])?;
    let tau: f64 = parse_num(table.headers[1].0, &tau_field[0])?;
    let values = read_hsa(&table.rows, 0, shape[0], shape[1], shape[2])?;
    QTable::from_table(shape[0], shape[1], shape[2], values, tau)
}

pub fn grid_to_string(g: &GridFunction) -> String {
    use std::fmt::Write as _;
    let mut out = format!(
        "# symmfg grid v1\n# cells {} denominator {} outputs {}\n",
        g.n_cells(),
        g.denominator(),
        g.out_dim()
    );
    for (p, v) in g.points().iter().zip(g.values()) {
        let fields: Vec<String> = p.iter().map(u32::to_string).chain(v.iter().map(f64::to_string)).collect();
        let _ = writeln!(out, "{}", fields.join("\t"));
    }
    out
}

pub fn grid_from_str(text: &str) -> Result<GridFunction> {
    let table = read_table(text);
    expect_tag(&table, "symmfg grid v1")?;
    let shape = shape_from(&table, &["cells", "denominator", "outputs"])?;
    let (cells, denom, out_dim) = (shape[0], shape[1], shape[2]);
    let mut points = Vec::with_capacity(table.rows.len());
    let mut values = Vec::with_capacity(table.rows.len());
    for (line, fields) in &table.rows {
        if fields.len() != cells + out_dim {
            return Err(parse_err(*line, format!("expected {} columns, found {}", cells + out_dim, fields.len())));
        }
        points.push(fields[..cells].iter().map(|f| parse_num(*line, f)).collect::<Result<Vec<u32>>>()?);
        values.push(fields[cells..].iter().map(|f| parse_num(*line, f)).collect::<Result<Vec<f64>>>()?);
    }
    GridFunction::from_table(cells, denom as u32, out_dim, points, values)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

pub fn save_policy(path: &Path, pi: &Policy) -> Result<()> {
    write_file(path, &policy_to_string(pi))
}

pub fn load_policy(path: &Path) -> Result<Policy> {
    policy_from_str(&std::fs::read_to_string(path)?)
}

pub fn save_profile(path: &Path, policies: &[Policy]) -> Result<()> {
    write_file(path, &profile_to_string(policies)?)
}

pub fn load_profile(path: &Path) -> Result<Vec<Policy>> {
    profile_from_str(&std::fs::read_to_string(path)?)
}

pub fn save_qtable(path: &Path, q: &QTable) -> Result<()> {
    write_file(path, &qtable_to_string(q))
}

pub fn load_qtable(path: &Path) -> Result<QTable> {
    qtable_from_str(&std::fs::read_to_string(path)?)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// Formats one trace row (no trailing newline).
pub fn trace_line(row: &MetricRow) -> String {
    [
        row.epoch.to_string(),
        row.samples_consumed.to_string(),
        fmt_opt(row.mfg_exploitability),
        fmt_opt(row.mfg_exploitability_normalized),
        fmt_opt(row.nplayer_exploitability.map(|e| e.mean)),
        fmt_opt(row.nplayer_exploitability.map(|e| e.std_error)),
        fmt_opt(row.nplayer_exploitability_normalized.map(|e| e.mean)),
        fmt_opt(row.nplayer_exploitability_normalized.map(|e| e.std_error)),
        fmt_opt(row.wall_time_s),
    ]
    .join("\t")
}

/// Append-only metric trace; every row is flushed as soon as it is written,
/// so an interrupted run leaves a valid prefix.
pub struct TraceWriter {
    out: BufWriter<File>,
}

impl TraceWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{}", TRACE_COLUMNS.join("\t"))?;
        out.flush()?;
        Ok(Self { out })
    }

    pub fn write(&mut self, row: &MetricRow) -> Result<()> {
        writeln!(self.out, "{}", trace_line(row))?;
        self.out.flush()?;
        Ok(())
    }
}

/// Trajectory dump: one row per `(episode, step, agent)`.
pub struct TrajectoryWriter {
    out: BufWriter<File>,
}

impl TrajectoryWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "# symmfg trajectory v1")?;
        writeln!(out, "episode\tstep\tagent\tstate\taction\treward")?;
        Ok(Self { out })
    }

    pub fn write(&mut self, episode: usize, traj: &Trajectory) -> Result<()> {
        for h in 0..traj.horizon {
            for i in 0..traj.n_agents {
                writeln!(
                    self.out,
                    "{episode}\t{h}\t{i}\t{}\t{}\t{}",
                    traj.state(h, i),
                    traj.action(h, i),
                    traj.reward(h, i)
                )?;
            }
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_round_trip() {
        let pi = Policy::from_table(2, 2, 3, vec![0.1, 0.2, 0.7, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0, 1.0, 0.0, 0.25, 0.5, 0.25]).unwrap();
        assert_eq!(policy_from_str(&policy_to_string(&pi)).unwrap(), pi);
    }

    #[test]
    fn qtable_round_trip() {
        let q = QTable::from_table(1, 2, 2, vec![0.1, -3.5, 1e-17, 2.0 / 3.0], 0.05).unwrap();
        assert_eq!(qtable_from_str(&qtable_to_string(&q)).unwrap(), q);
    }

    #[test]
    fn profile_round_trip() {
        let a = Policy::uniform(2, 2, 2);
        let b = Policy::deterministic(2, 2, 2, &[0, 1, 1, 0]);
        let back = profile_from_str(&profile_to_string(&[a.clone(), b.clone()]).unwrap()).unwrap();
        assert_eq!(back, vec![a, b]);
    }

    #[test]
    fn grid_round_trip() {
        let g = GridFunction::from_fn(3, 2, 2, |c| vec![f64::from(c[0]) / 3.0, -f64::from(c[2])]).unwrap();
        let back = grid_from_str(&grid_to_string(&g)).unwrap();
        assert_eq!(back.values(), g.values());
        assert_eq!(back.get(&[1, 0, 1]), g.get(&[1, 0, 1]));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = "# symmfg policy v1\n# horizon 1 states 1 actions 2\n0\t0\t0\t0.5\n0\t0\t1\tabc\n";
        match policy_from_str(text) {
            Err(Error::Parse { line: 4, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let text = "# symmfg policy v1\n# horizon 1 states 1 actions 2\n0\t0\t0\t0.5\n";
        assert!(matches!(policy_from_str(text), Err(Error::Parse { .. })));
    }
}
