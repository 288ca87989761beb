//! Line-oriented text formats.
//!
//! All formats ignore blank lines and lines starting with `#`. Numbers are written
//! with Rust's shortest round-trip float formatting, so write-then-read is exact.
//!
//! Problem:
//!
//! ```text
//! ising <n>
//! c <i> <j> <J_ij>      one line per coupling, i < j
//! f <i> <h_i>           one line per non-zero field
//! ```
//!
//! Hardware:
//!
//! ```text
//! chimera <M> <N> <L>
//! xq <q>                removed qubit
//! xe <a> <b>            removed coupler
//! ```
//!
//! Embedding: one line `<v>: <q1> <q2> ...` per chain.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use chimera_embed::solver::SolveTrace;
use chimera_embed::{ChimeraSpec, Embedding, HardwareGraph, ProblemGraph};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn parse_err(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Parse { line, message: message.into() }
}

/// Non-comment lines with their 1-based numbers.
fn content_lines(r: impl BufRead) -> impl Iterator<Item = Result<(usize, String), FormatError>> {
    r.lines().enumerate().filter_map(|(i, line)| match line {
        Err(e) => Some(Err(e.into())),
        Ok(l) => {
            let t = l.trim();
            (!t.is_empty() && !t.starts_with('#')).then(|| Ok((i + 1, t.to_owned())))
        }
    })
}

fn field<T: FromStr>(line: usize, tokens: &[&str], i: usize, what: &str) -> Result<T, FormatError> {
    let tok = tokens.get(i).ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse().map_err(|_| parse_err(line, format!("bad {what} {tok:?}")))
}

fn arity(line: usize, tokens: &[&str], n: usize) -> Result<(), FormatError> {
    if tokens.len() != n {
        return Err(parse_err(line, format!("expected {n} tokens, found {}", tokens.len())));
    }
    Ok(())
}

pub fn write_problem(p: &ProblemGraph, mut w: impl Write) -> io::Result<()> {
    writeln!(w, "ising {}", p.num_vars())?;
    for (&(i, j), &c) in p.couplings() {
        writeln!(w, "c {i} {j} {c:?}")?;
    }
    for (i, &h) in p.fields().iter().enumerate() {
        if h != 0.0 {
            writeln!(w, "f {i} {h:?}")?;
        }
    }
    Ok(())
}

pub fn read_problem(r: impl BufRead) -> Result<ProblemGraph, FormatError> {
    let mut lines = content_lines(r);
    let (line, header) = lines.next().ok_or_else(|| parse_err(0, "empty problem file"))??;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.first() != Some(&"ising") {
        return Err(parse_err(line, "expected header `ising <n>`"));
    }
    arity(line, &tokens, 2)?;
    let n: usize = field(line, &tokens, 1, "variable count")?;
    let mut couplings = BTreeMap::new();
    let mut fields = vec![0.0; n];
    for item in lines {
        let (line, text) = item?;
        let tokens: Vec<&str> = text.split_whitespace().collect();
        match tokens[0] {
            "c" => {
                arity(line, &tokens, 4)?;
                let i: usize = field(line, &tokens, 1, "variable")?;
                let j: usize = field(line, &tokens, 2, "variable")?;
                let c: f64 = field(line, &tokens, 3, "coupling")?;
                let key = (i.min(j), i.max(j));
                if couplings.insert(key, c).is_some() {
                    return Err(parse_err(line, format!("duplicate coupling ({i}, {j})")));
                }
            }
            "f" => {
                arity(line, &tokens, 3)?;
                let i: usize = field(line, &tokens, 1, "variable")?;
                let h: f64 = field(line, &tokens, 2, "field")?;
                *fields.get_mut(i).ok_or_else(|| parse_err(line, format!("variable {i} out of range")))? = h;
            }
            other => return Err(parse_err(line, format!("unknown record {other:?}"))),
        }
    }
    ProblemGraph::new(n, couplings, fields).map_err(|e| parse_err(0, e.to_string()))
}

pub fn write_hardware(hw: &HardwareGraph, mut w: impl Write) -> io::Result<()> {
    let s = hw.spec();
    writeln!(w, "chimera {} {} {}", s.rows, s.cols, s.shore)?;
    for q in hw.defect_qubits() {
        writeln!(w, "xq {q}")?;
    }
    for (a, b) in hw.defect_edges() {
        writeln!(w, "xe {a} {b}")?;
    }
    Ok(())
}

pub fn read_hardware(r: impl BufRead) -> Result<HardwareGraph, FormatError> {
    let mut lines = content_lines(r);
    let (line, header) = lines.next().ok_or_else(|| parse_err(0, "empty hardware file"))??;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.first() != Some(&"chimera") {
        return Err(parse_err(line, "expected header `chimera <M> <N> <L>`"));
    }
    arity(line, &tokens, 4)?;
    let dims: [usize; 3] = [
        field(line, &tokens, 1, "row count")?,
        field(line, &tokens, 2, "column count")?,
        field(line, &tokens, 3, "shore size")?,
    ];
    let spec = ChimeraSpec::new(dims[0], dims[1], dims[2]).map_err(|e| parse_err(line, e.to_string()))?;
    let mut qubits = BTreeSet::new();
    let mut edges = BTreeSet::new();
    for item in lines {
        let (line, text) = item?;
        let tokens: Vec<&str> = text.split_whitespace().collect();
        match tokens[0] {
            "xq" => {
                arity(line, &tokens, 2)?;
                qubits.insert(field(line, &tokens, 1, "qubit")?);
            }
            "xe" => {
                arity(line, &tokens, 3)?;
                edges.insert((field(line, &tokens, 1, "qubit")?, field(line, &tokens, 2, "qubit")?));
            }
            other => return Err(parse_err(line, format!("unknown record {other:?}"))),
        }
    }
    HardwareGraph::build(spec, &qubits, &edges).map_err(|e| parse_err(0, e.to_string()))
}

pub fn write_embedding(emb: &Embedding, mut w: impl Write) -> io::Result<()> {
    for (v, chain) in emb.chains() {
        write!(w, "{v}:")?;
        for q in chain {
            write!(w, " {q}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_embedding(r: impl BufRead) -> Result<Embedding, FormatError> {
    let mut emb = Embedding::new();
    for item in content_lines(r) {
        let (line, text) = item?;
        let (var, rest) = text.split_once(':').ok_or_else(|| parse_err(line, "expected `<v>: <q> ...`"))?;
        let v: usize = var.trim().parse().map_err(|_| parse_err(line, format!("bad variable {var:?}")))?;
        let chain = rest
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| parse_err(line, format!("bad qubit {t:?}"))))
            .collect::<Result<Vec<usize>, _>>()?;
        if chain.is_empty() {
            return Err(parse_err(line, format!("variable {v} has an empty chain")));
        }
        if emb.chain(v).is_some() {
            return Err(parse_err(line, format!("variable {v} listed twice")));
        }
        emb.insert(v, chain);
    }
    Ok(emb)
}

pub const TRACE_HEADER: &str = "iter,n_sub,e_sub_before,e_sub_after,e_full,e_best,chain_breaks";

/// One row per iteration; absent values are empty fields.
pub fn write_trace_csv(trace: &SolveTrace, mut w: impl Write) -> io::Result<()> {
    fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
        v.map(|x| x.to_string()).unwrap_or_default()
    }
    writeln!(w, "{TRACE_HEADER}")?;
    for r in &trace.records {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.iteration,
            r.n_sub,
            opt(r.e_sub_before),
            opt(r.e_sub_after),
            r.e_full,
            r.e_best,
            opt(r.chain_breaks)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chimera_embed::problem::{cubic_pm_j, Boundary};
    use proptest::prelude::*;

    #[test]
    fn problem_round_trip_and_comments() {
        let p = cubic_pm_j([3, 3, 3], 0.5, 1.5, Boundary::Periodic, 4).unwrap();
        let mut buf = Vec::new();
        write_problem(&p, &mut buf).unwrap();
        let back = read_problem(&buf[..]).unwrap();
        assert_eq!(back.couplings(), p.couplings());
        assert_eq!(back.fields(), p.fields());

        let text = "# comment\n\nising 3\nc 0 1 -1\nf 2 0.25\n";
        let p = read_problem(text.as_bytes()).unwrap();
        assert_eq!(p.coupling(0, 1), Some(-1.0));
        assert_eq!(p.fields(), &[0.0, 0.0, 0.25]);
    }

    #[test]
    fn malformed_files_report_the_line() {
        let cases = [
            ("ising 2\nc 0 1\n", 2),
            ("ising 2\nc 0 1 1\nc 1 0 1\n", 3),
            ("ising 2\nq 0\n", 2),
            ("ising 2\nf 5 1\n", 2),
            ("chimera 2 2\n", 1),
        ];
        for (text, want) in cases {
            let err = if text.starts_with("ising") {
                read_problem(text.as_bytes()).unwrap_err()
            } else {
                read_hardware(text.as_bytes()).unwrap_err()
            };
            match err {
                FormatError::Parse { line, .. } => assert_eq!(line, want, "{text:?}"),
                other => panic!("{other}"),
            }
        }
        assert!(read_problem("ising 2\nc 0 0 1\n".as_bytes()).is_err());
        assert!(read_embedding("0 1 2\n".as_bytes()).is_err());
        assert!(read_embedding("0:\n".as_bytes()).is_err());
    }

    #[test]
    fn hardware_round_trip() {
        let spec = ChimeraSpec::new(3, 2, 4).unwrap();
        let hw = HardwareGraph::build(spec, &[5, 17].into(), &[(0, 4), (1, 6)].into()).unwrap();
        let mut buf = Vec::new();
        write_hardware(&hw, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "chimera 3 2 4\nxq 5\nxq 17\nxe 0 4\nxe 1 6\n");
        let back = read_hardware(&buf[..]).unwrap();
        assert_eq!(back.num_edges(), hw.num_edges());
        assert_eq!(back.defect_qubits(), hw.defect_qubits());
    }

    proptest! {
        #[test]
        fn embedding_round_trip(chains in proptest::collection::btree_map(0usize..50, proptest::collection::vec(0usize..500, 1..6), 0..20)) {
            let emb = Embedding::from_chains(chains);
            let mut buf = Vec::new();
            write_embedding(&emb, &mut buf).unwrap();
            prop_assert_eq!(read_embedding(&buf[..]).unwrap(), emb);
        }

        #[test]
        fn float_fields_round_trip(js in proptest::collection::vec(-1e3f64..1e3, 1..10), h in -5.0f64..5.0) {
            let n = js.len() + 1;
            let p = ProblemGraph::new(n, js.iter().enumerate().map(|(i, &j)| ((i, i + 1), j)), vec![h; n]).unwrap();
            let mut buf = Vec::new();
            write_problem(&p, &mut buf).unwrap();
            let back = read_problem(&buf[..]).unwrap();
            prop_assert_eq!(back.couplings(), p.couplings());
            prop_assert_eq!(back.fields(), p.fields());
        }
    }
}
