//! MatrixMarket graph files and QAPLIB instances.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use super::maxcut::GraphInstance;
use super::qap::QapInstance;
use super::IndexMapping;
use crate::error::{Error, Result};

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

pub fn parse_graph_mm(path: impl AsRef<Path>) -> Result<GraphInstance> {
    parse_graph_mm_str(&std::fs::read_to_string(path)?)
}

/// Parses a MatrixMarket `coordinate` file (`pattern`, `real` or `integer`;
/// `symmetric` or `general`) as an undirected graph. Pattern entries weigh
/// 1, repeated entries are summed and diagonal entries are ignored. In
/// `general` files every off-diagonal entry needs an equal mirror.
pub fn parse_graph_mm_str(text: &str) -> Result<GraphInstance> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let h: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if h.len() != 5 || h[0] != "%%matrixmarket" || h[1] != "matrix" || h[2] != "coordinate" {
        return Err(parse_err(hline, "expected '%%MatrixMarket matrix coordinate <field> <symmetry>'"));
    }
    let pattern = match h[3].as_str() {
        "pattern" => true,
        "real" | "integer" => false,
        f => return Err(parse_err(hline, format!("unsupported field '{f}'"))),
    };
    let symmetric = match h[4].as_str() {
        "symmetric" => true,
        "general" => false,
        s => return Err(parse_err(hline, format!("unsupported symmetry '{s}'"))),
    };
    let mut body = lines.filter(|(_, l)| !l.is_empty() && !l.starts_with('%'));
    let (sline, size) = body.next().ok_or_else(|| parse_err(hline + 1, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| parse_err(sline, format!("bad integer '{t}'"))))
        .collect::<Result<_>>()?;
    if dims.len() != 3 {
        return Err(parse_err(sline, "size line needs 'rows cols entries'"));
    }
    if dims[0] != dims[1] {
        return Err(parse_err(sline, format!("matrix is {}x{}, not square", dims[0], dims[1])));
    }
    let n = dims[0];
    let mut entries: HashMap<(usize, usize), f64> = HashMap::new();
    let mut count = 0;
    let mut last = sline;
    for (ln, l) in body {
        last = ln;
        let tok: Vec<&str> = l.split_whitespace().collect();
        let want = if pattern { 2 } else { 3 };
        if tok.len() != want {
            return Err(parse_err(ln, format!("expected {want} fields, found {}", tok.len())));
        }
        let idx = |t: &str| -> Result<usize> {
            let v: usize = t.parse().map_err(|_| parse_err(ln, format!("bad index '{t}'")))?;
            if v == 0 || v > n {
                return Err(parse_err(ln, format!("index {v} outside 1..={n}")));
            }
            Ok(v - 1)
        };
        let (i, j) = (idx(tok[0])?, idx(tok[1])?);
        let w = if pattern {
            1.0
        } else {
            tok[2].parse::<f64>().map_err(|_| parse_err(ln, format!("bad value '{}'", tok[2])))?
        };
        count += 1;
        if i != j {
            let key = if symmetric { (i.max(j), i.min(j)) } else { (i, j) };
            *entries.entry(key).or_insert(0.0) += w;
        }
    }
    if count != dims[2] {
        return Err(parse_err(last, format!("expected {} entries, found {count}", dims[2])));
    }
    let mut edges = Vec::new();
    if symmetric {
        edges.extend(entries.iter().map(|(&(i, j), &w)| (j, i, w)));
    } else {
        for (&(i, j), &w) in &entries {
            match entries.get(&(j, i)) {
                Some(&m) if m == w => {
                    if i < j {
                        edges.push((i, j, w));
                    }
                }
                _ => {
                    return Err(parse_err(
                        last,
                        format!("entry ({}, {}) has no matching mirror in a general file", i + 1, j + 1),
                    ))
                }
            }
        }
    }
    GraphInstance::new(n, edges)
}

/// Lower-triangle `real symmetric` MatrixMarket text.
pub fn write_graph_mm(g: &GraphInstance) -> String {
    let mut s = String::from("%%MatrixMarket matrix coordinate real symmetric\n");
    let _ = writeln!(s, "{} {} {}", g.n, g.n, g.edges.len());
    for &(u, v, w) in &g.edges {
        let _ = writeln!(s, "{} {} {}", v + 1, u + 1, w);
    }
    s
}

pub fn parse_qaplib(path: impl AsRef<Path>) -> Result<QapInstance> {
    parse_qaplib_str(&std::fs::read_to_string(path)?)
}

/// Parses QAPLIB text: the size `n`, then the `n × n` flow matrix `W`, then
/// the `n × n` distance matrix `D`, as whitespace-separated numbers. If one
/// matrix is asymmetric while the other is symmetric it is replaced by its
/// symmetric part (the objective is unchanged); two asymmetric matrices are
/// rejected.
pub fn parse_qaplib_str(text: &str) -> Result<QapInstance> {
    let mut tokens = text
        .lines()
        .enumerate()
        .flat_map(|(i, l)| l.split_whitespace().map(move |t| (i + 1, t)));
    let (ln, t) = tokens.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let n: usize = t.parse().map_err(|_| parse_err(ln, format!("bad size '{t}'")))?;
    if n == 0 {
        return Err(parse_err(ln, "size must be positive"));
    }
    let mut last = ln;
    let mut read_block = |name: &str| -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(n, n);
        for k in 0..n * n {
            let (ln, t) = tokens
                .next()
                .ok_or_else(|| parse_err(last, format!("{name} ends after {k} of {} values", n * n)))?;
            last = ln;
            m[(k / n, k % n)] = t.parse().map_err(|_| parse_err(ln, format!("bad number '{t}'")))?;
        }
        Ok(m)
    };
    let w = read_block("W")?;
    let d = read_block("D")?;
    if let Some((ln, t)) = tokens.next() {
        return Err(parse_err(ln, format!("trailing token '{t}'")));
    }
    let sym = |a: &DMatrix<f64>| a == &a.transpose();
    let (w, d) = match (sym(&w), sym(&d)) {
        (true, true) => (w, d),
        (true, false) => {
            let ds = (&d + d.transpose()) * 0.5;
            (w, ds)
        }
        (false, true) => {
            let ws = (&w + w.transpose()) * 0.5;
            (ws, d)
        }
        (false, false) => return Err(parse_err(last, "W and D are both asymmetric")),
    };
    QapInstance::new(w, d)
}

pub fn write_qaplib(q: &QapInstance) -> String {
    let mut s = format!("{}\n", q.size);
    for m in [&q.w, &q.d] {
        s.push('\n');
        for i in 0..q.size {
            let row: Vec<String> = (0..q.size).map(|j| m[(i, j)].to_string()).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
    }
    s
}

/// Text form of an [`IndexMapping`]:
///
/// ```text
/// usbs-mapping 1
/// primal <old_n> <new_n>
/// <one new index per line>
/// constraints <old_m> <new_m>
/// <one new row per line, or '-' when dropped>
/// ```
pub fn write_mapping(map: &IndexMapping, new_n: usize, new_m: usize) -> String {
    let mut s = String::from("usbs-mapping 1\n");
    let _ = writeln!(s, "primal {} {new_n}", map.primal.len());
    for p in &map.primal {
        let _ = writeln!(s, "{p}");
    }
    let _ = writeln!(s, "constraints {} {new_m}", map.constraints.len());
    for c in &map.constraints {
        match c {
            Some(c) => {
                let _ = writeln!(s, "{c}");
            }
            None => s.push_str("-\n"),
        }
    }
    s
}

/// Parses [`write_mapping`] output into the mapping and the target
/// dimensions `(new_n, new_m)`.
pub fn parse_mapping_str(text: &str) -> Result<(IndexMapping, usize, usize)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let mut next = |what: &str| lines.next().ok_or_else(|| parse_err(0, format!("missing {what}")));
    let (ln, head) = next("header")?;
    if head != "usbs-mapping 1" {
        return Err(parse_err(ln, "expected 'usbs-mapping 1'"));
    }
    let mut section = |name: &str| -> Result<(usize, usize, Vec<(usize, String)>)> {
        let (ln, l) = next(name)?;
        let t: Vec<&str> = l.split_whitespace().collect();
        let num = |s: &str| s.parse::<usize>().map_err(|_| parse_err(ln, format!("bad count '{s}'")));
        if t.len() != 3 || t[0] != name {
            return Err(parse_err(ln, format!("expected '{name} <old> <new>'")));
        }
        let (old, new) = (num(t[1])?, num(t[2])?);
        let body = (0..old).map(|_| next("index").map(|(l, s)| (l, s.to_string()))).collect::<Result<_>>()?;
        Ok((old, new, body))
    };
    let (_, new_n, prim) = section("primal")?;
    let primal = prim
        .into_iter()
        .map(|(l, s)| s.parse().map_err(|_| parse_err(l, format!("bad index '{s}'"))))
        .collect::<Result<_>>()?;
    let (_, new_m, cons) = section("constraints")?;
    let constraints = cons
        .into_iter()
        .map(|(l, s)| match s.as_str() {
            "-" => Ok(None),
            _ => s.parse().map(Some).map_err(|_| parse_err(l, format!("bad index '{s}'"))),
        })
        .collect::<Result<_>>()?;
    if let Some((ln, l)) = lines.next() {
        return Err(parse_err(ln, format!("unexpected '{l}'")));
    }
    Ok((IndexMapping { primal, constraints }, new_n, new_m))
}

pub fn parse_mapping(path: impl AsRef<Path>) -> Result<(IndexMapping, usize, usize)> {
    parse_mapping_str(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn triangle_pattern_file() {
        let text = "%%MatrixMarket matrix coordinate pattern symmetric\n% K3\n3 3 3\n2 1\n3 1\n3 2\n";
        let g = parse_graph_mm_str(text).unwrap();
        assert_eq!(g, GraphInstance::new(3, vec![(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)]).unwrap());
    }

    #[test]
    fn general_file_needs_mirrors() {
        let ok = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 2 3.5\n2 1 3.5\n";
        assert_eq!(parse_graph_mm_str(ok).unwrap().edges, vec![(0, 1, 3.5)]);
        let bad = "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 2 3.5\n";
        assert!(matches!(parse_graph_mm_str(bad), Err(Error::Parse { .. })));
    }

    #[test]
    fn duplicates_sum_and_loops_vanish() {
        let text = "%%MatrixMarket matrix coordinate integer symmetric\n3 3 4\n2 1 1\n1 2 2\n3 3 9\n3 2 1\n";
        let g = parse_graph_mm_str(text).unwrap();
        assert_eq!(g.edges, vec![(0, 1, 3.0), (1, 2, 1.0)]);
    }

    #[test]
    fn malformed_files_report_lines() {
        let cases = [
            ("%%MatrixMarket matrix array real general\n", 1),
            ("%%MatrixMarket matrix coordinate real symmetric\n2 3 0\n", 2),
            ("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 x 1\n", 3),
            ("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 5 1\n", 3),
            ("%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n2 1 1\n", 3),
        ];
        for (text, line) in cases {
            match parse_graph_mm_str(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("expected parse error for {text:?}, got {other:?}"),
            }
        }
    }

    #[test]
    fn graph_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let edges = (0..40)
            .map(|_| (rng.random_range(0..20), rng.random_range(0..20), rng.random_range(0.1..5.0)))
            .collect();
        let g = GraphInstance::new(20, edges).unwrap();
        assert_eq!(parse_graph_mm_str(&write_graph_mm(&g)).unwrap(), g);
    }

    #[test]
    fn qaplib_small_and_round_trip() {
        let q = parse_qaplib_str("2\n\n0 3\n3 0\n\n0 5\n5 0\n").unwrap();
        assert_eq!(q.size, 2);
        assert_eq!(q.w[(0, 1)], 3.0);
        assert_eq!(q.d[(1, 0)], 5.0);
        assert_eq!(parse_qaplib_str(&write_qaplib(&q)).unwrap(), q);

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut r = |_: usize, _: usize| rng.random_range(0..100) as f64;
        let a = DMatrix::from_fn(5, 5, &mut r);
        let b = DMatrix::from_fn(5, 5, &mut r);
        let q = QapInstance::new(&a + a.transpose(), &b + b.transpose()).unwrap();
        assert_eq!(parse_qaplib_str(&write_qaplib(&q)).unwrap(), q);
    }

    #[test]
    fn qaplib_asymmetry_handling() {
        let one_sided = parse_qaplib_str("2\n0 1\n1 0\n0 4\n2 0\n").unwrap();
        assert_eq!(one_sided.d[(0, 1)], 3.0);
        assert!(parse_qaplib_str("2\n0 1\n2 0\n0 4\n2 0\n").is_err());
        match parse_qaplib_str("2\n0 1\n1 0\n0 4\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        assert!(parse_qaplib_str("2\n0 1 1 0 0 1 1 0 7").is_err());
    }

    #[test]
    fn mapping_round_trip() {
        let map = IndexMapping {
            primal: vec![0, 2, 1],
            constraints: vec![Some(1), None, Some(0)],
        };
        let text = write_mapping(&map, 4, 5);
        assert_eq!(parse_mapping_str(&text).unwrap(), (map, 4, 5));
        assert!(parse_mapping_str("usbs-mapping 2\n").is_err());
        assert!(parse_mapping_str("usbs-mapping 1\nprimal 2 3\n0\n").is_err());
        assert!(parse_mapping_str(&(text + "7\n")).is_err());
    }
}
