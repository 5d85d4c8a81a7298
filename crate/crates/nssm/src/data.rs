//! CSV readers and writers for panels, networks and covariates.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nssm_core::graph::{row_normalize, Adjacency, NetworkSeq, WeightMatrix};
use nssm_core::linalg::Matrix;

use crate::error::{CliError, CliResult};

fn reader(path: &Path) -> CliResult<csv::Reader<File>> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_path(path)
        .map_err(|e| CliError::input(path, e.to_string()))
}

fn records(path: &Path) -> CliResult<Vec<Vec<String>>> {
    let mut out = Vec::new();
    for rec in reader(path)?.records() {
        let rec = rec.map_err(|e| CliError::input(path, e.to_string()))?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        out.push(rec.iter().map(str::to_owned).collect());
    }
    if out.is_empty() {
        return Err(CliError::input(path, "file is empty"));
    }
    Ok(out)
}

fn number(path: &Path, line: usize, field: &str) -> CliResult<f64> {
    field.parse::<f64>().map_err(|_| CliError::input(path, format!("line {line}: `{field}` is not a number")))
}

fn index(path: &Path, line: usize, field: &str) -> CliResult<usize> {
    field.parse::<usize>().map_err(|_| CliError::input(path, format!("line {line}: `{field}` is not a nonnegative integer")))
}

fn is_header(row: &[String]) -> bool {
    row.iter().any(|f| f.parse::<f64>().is_err())
}

/// Reads a panel in long (`time,node,value`) or wide (`T x N` with an
/// optional header of node names) format.
pub fn read_panel(path: &Path) -> CliResult<Matrix> {
    let rows = records(path)?;
    let header: Vec<&str> = rows[0].iter().map(String::as_str).collect();
    if header == ["time", "node", "value"] {
        let mut cells = BTreeMap::new();
        let (mut t_max, mut n_max) = (0, 0);
        for (i, r) in rows.iter().enumerate().skip(1) {
            let (t, n) = (index(path, i + 1, &r[0])?, index(path, i + 1, &r[1])?);
            if cells.insert((t, n), number(path, i + 1, &r[2])?).is_some() {
                return Err(CliError::input(path, format!("line {}: duplicate cell (time {t}, node {n})", i + 1)));
            }
            t_max = t_max.max(t);
            n_max = n_max.max(n);
        }
        let (t_len, n) = (t_max + 1, n_max + 1);
        if cells.len() != t_len * n {
            return Err(CliError::input(path, format!("long panel has {} cells, expected {t_len} x {n}", cells.len())));
        }
        return Ok(Matrix::from_fn(t_len, n, |t, i| cells[&(t, i)]));
    }
    let body = if is_header(&rows[0]) { &rows[1..] } else { &rows[..] };
    if body.is_empty() {
        return Err(CliError::input(path, "panel has no data rows"));
    }
    let n = body[0].len();
    let mut data = Vec::with_capacity(body.len() * n);
    for (i, r) in body.iter().enumerate() {
        for f in r {
            data.push(number(path, i + 2, f)?);
        }
    }
    Matrix::new(body.len(), n, data).map_err(|e| CliError::input(path, e.to_string()))
}

/// Reads an edge list (`[time,]src,dst[,weight]`) or a dense `N x N`
/// matrix and row-normalizes it. Edge lists with several time values give
/// one snapshot per panel row. Node and row counts are inferred when
/// `None`.
pub fn read_network(path: &Path, n: Option<usize>, rows: Option<usize>, directed: bool) -> CliResult<NetworkSeq> {
    let recs = records(path)?;
    let header: Vec<&str> = recs[0].iter().map(String::as_str).collect();
    let bad = |m: String| CliError::input(path, m);
    if header.first() == Some(&"time") || header.first() == Some(&"src") {
        let col = |name: &str| header.iter().position(|h| *h == name);
        let (ti, si, di, wi) = (col("time"), col("src"), col("dst"), col("weight"));
        let (si, di) = match (si, di) {
            (Some(s), Some(d)) => (s, d),
            _ => return Err(bad(String::from("edge list header needs `src` and `dst`"))),
        };
        let mut by_time: BTreeMap<usize, Vec<(usize, usize, f64)>> = BTreeMap::new();
        let mut max_node = 0;
        for (i, r) in recs.iter().enumerate().skip(1) {
            let t = match ti {
                Some(c) => index(path, i + 1, &r[c])?,
                None => 0,
            };
            let w = match wi {
                Some(c) => number(path, i + 1, &r[c])?,
                None => 1.0,
            };
            let (s, d) = (index(path, i + 1, &r[si])?, index(path, i + 1, &r[di])?);
            max_node = max_node.max(s).max(d);
            by_time.entry(t).or_default().push((s, d, w));
        }
        let n = n.unwrap_or(max_node + 1);
        let build = |edges: &[(usize, usize, f64)]| {
            Adjacency::from_edges(n, edges, directed).map(|a| row_normalize(&a)).map_err(|e| bad(e.to_string()))
        };
        if by_time.len() <= 1 {
            let edges = by_time.into_values().next().unwrap_or_default();
            return Ok(NetworkSeq::Static(build(&edges)?));
        }
        let rows = rows.unwrap_or_else(|| by_time.keys().last().map_or(0, |t| t + 1));
        let mut ws = Vec::with_capacity(rows);
        for t in 0..rows {
            let edges = by_time.get(&t).ok_or_else(|| bad(format!("no edges listed for time {t}")))?;
            ws.push(build(edges)?);
        }
        return Ok(NetworkSeq::Dynamic(ws));
    }
    let body = if is_header(&recs[0]) { &recs[1..] } else { &recs[..] };
    let n = n.unwrap_or(body.len());
    if body.len() != n || body.iter().any(|r| r.len() != n) {
        return Err(bad(format!("dense network must be {n} x {n}")));
    }
    let mut m = Matrix::zeros(n, n);
    for (i, r) in body.iter().enumerate() {
        for (j, f) in r.iter().enumerate() {
            m[(i, j)] = number(path, i + 1, f)?;
        }
    }
    let a = Adjacency::new(m, true, None).map_err(|e| bad(e.to_string()))?;
    Ok(NetworkSeq::Static(row_normalize(&a)))
}

/// Reads `time,node,cov1,...,covq` into one `N x q` matrix per time.
pub fn read_covariates(path: &Path, n: usize, q: usize) -> CliResult<Vec<Matrix>> {
    let recs = records(path)?;
    if recs[0].len() != q + 2 || recs[0][0] != "time" || recs[0][1] != "node" {
        return Err(CliError::input(path, format!("header must be time,node followed by {q} covariate columns")));
    }
    let mut by_time: BTreeMap<usize, Matrix> = BTreeMap::new();
    for (i, r) in recs.iter().enumerate().skip(1) {
        let (t, node) = (index(path, i + 1, &r[0])?, index(path, i + 1, &r[1])?);
        if node >= n {
            return Err(CliError::input(path, format!("line {}: node {node} out of range", i + 1)));
        }
        let z = by_time.entry(t).or_insert_with(|| Matrix::zeros(n, q));
        for c in 0..q {
            z[(node, c)] = number(path, i + 1, &r[c + 2])?;
        }
    }
    let times: Vec<usize> = by_time.keys().copied().collect();
    if times.iter().enumerate().any(|(i, &t)| i != t) {
        return Err(CliError::input(path, "covariate times must be 0, 1, 2, ... without gaps"));
    }
    Ok(by_time.into_values().collect())
}

pub struct CsvOut {
    path: std::path::PathBuf,
    w: BufWriter<File>,
}

impl CsvOut {
    pub fn create(path: &Path, header: &[&str]) -> CliResult<Self> {
        let f = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut out = Self { path: path.to_path_buf(), w: BufWriter::new(f) };
        out.raw(&header.join(","))?;
        Ok(out)
    }

    fn raw(&mut self, line: &str) -> CliResult<()> {
        writeln!(self.w, "{line}").map_err(|e| CliError::io(&self.path, e))
    }

    pub fn row(&mut self, fields: &[String]) -> CliResult<()> {
        self.raw(&fields.join(","))
    }

    pub fn finish(mut self) -> CliResult<()> {
        self.w.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

/// Shortest round-trip representation.
pub fn fmt(v: f64) -> String {
    format!("{v}")
}

pub fn write_panel(path: &Path, panel: &Matrix) -> CliResult<()> {
    let header: Vec<String> = (0..panel.cols()).map(|i| format!("node_{i}")).collect();
    let mut out = CsvOut::create(path, &header.iter().map(String::as_str).collect::<Vec<_>>())?;
    for t in 0..panel.rows() {
        out.row(&panel.row(t).iter().map(|&v| fmt(v)).collect::<Vec<_>>())?;
    }
    out.finish()
}

/// Nonzero entries as `src,dst,weight`, or `time,src,dst,weight` for a
/// sequence of snapshots.
pub fn write_edges(path: &Path, mats: &[&Matrix]) -> CliResult<()> {
    let timed = mats.len() > 1;
    let header: &[&str] = if timed { &["time", "src", "dst", "weight"] } else { &["src", "dst", "weight"] };
    let mut out = CsvOut::create(path, header)?;
    for (t, m) in mats.iter().enumerate() {
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                let v = m[(i, j)];
                if v != 0.0 {
                    let mut f = vec![i.to_string(), j.to_string(), fmt(v)];
                    if timed {
                        f.insert(0, t.to_string());
                    }
                    out.row(&f)?;
                }
            }
        }
    }
    out.finish()
}

pub fn network_matrices(w: &NetworkSeq) -> Vec<&Matrix> {
    match w {
        NetworkSeq::Static(w) => vec![w.matrix()],
        NetworkSeq::Dynamic(ws) => ws.iter().map(WeightMatrix::matrix).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn long_and_wide_panels_agree() {
        let dir = tempfile::tempdir().unwrap();
        let wide = write(dir.path(), "w.csv", "a,b\n1.5,2\n3,4.25\n");
        let long = write(dir.path(), "l.csv", "time,node,value\n0,0,1.5\n0,1,2\n1,1,4.25\n1,0,3\n");
        assert_eq!(read_panel(&wide).unwrap(), read_panel(&long).unwrap());
        let gap = write(dir.path(), "g.csv", "time,node,value\n0,0,1\n1,1,2\n");
        assert!(read_panel(&gap).is_err());
    }

    #[test]
    fn edge_list_and_dense_agree() {
        let dir = tempfile::tempdir().unwrap();
        let e = write(dir.path(), "e.csv", "src,dst\n0,1\n1,2\n");
        let d = write(dir.path(), "d.csv", "0,1,0\n1,0,1\n0,1,0\n");
        let a = read_network(&e, Some(3), Some(5), false).unwrap();
        let b = read_network(&d, None, Some(5), false).unwrap();
        assert_eq!(a.at(0).matrix(), b.at(0).matrix());
        assert_eq!(a.at(0).matrix()[(1, 0)], 0.5);
    }

    #[test]
    fn timed_edges_give_one_snapshot_per_row() {
        let dir = tempfile::tempdir().unwrap();
        let e = write(dir.path(), "e.csv", "time,src,dst,weight\n0,0,1,1\n1,1,2,2\n");
        let w = read_network(&e, Some(3), Some(2), true).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w.at(1).matrix()[(1, 2)], 1.0);
        assert!(read_network(&e, Some(3), Some(3), true).is_err());
    }

    #[test]
    fn written_files_read_back() {
        let dir = tempfile::tempdir().unwrap();
        let m = Matrix::from_rows(&[[0.1, -2.0], [1.0 / 3.0, 4e-9]]).unwrap();
        let p = dir.path().join("p.csv");
        write_panel(&p, &m).unwrap();
        assert_eq!(read_panel(&p).unwrap(), m);
        let w = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let q = dir.path().join("w.csv");
        write_edges(&q, &[&w]).unwrap();
        assert_eq!(read_network(&q, None, Some(1), true).unwrap().at(0).matrix(), &w);
    }

    #[test]
    fn covariates_by_time() {
        let dir = tempfile::tempdir().unwrap();
        let c = write(dir.path(), "z.csv", "time,node,a\n0,0,1\n0,1,2\n1,0,3\n1,1,4\n");
        let z = read_covariates(&c, 2, 1).unwrap();
        assert_eq!(z.len(), 2);
        assert_eq!(z[1][(1, 0)], 4.0);
    }
}
