//! Matrix Market coordinate reader producing column-stochastic matrices.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::{ProblemError, Result, SparseStochasticMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Pattern,
    Real,
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<SparseStochasticMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| ProblemError::Io(format!("{}: {e}", path.display())))?;
    parse_matrix_market(BufReader::new(file))
}

/// Entry `(i, j)` becomes `S[i, j]`; each nonzero column is scaled to unit
/// sum and empty columns are replaced by the uniform column.
pub fn parse_matrix_market<R: BufRead>(reader: R) -> Result<SparseStochasticMatrix> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    let err = |line: usize, message: String| ProblemError::ParseError { line, message };

    let (line_no, header) = match lines.next() {
        Some((n, l)) => (n, l.map_err(|e| ProblemError::Io(e.to_string()))?),
        None => return Err(ProblemError::EmptyMatrix),
    };
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(err(line_no, "expected '%%MatrixMarket matrix ...' header".into()));
    }
    if tokens[2] != "coordinate" {
        return Err(err(line_no, format!("unsupported format '{}'", tokens[2])));
    }
    let field = match tokens[3].as_str() {
        "pattern" => Field::Pattern,
        "real" | "integer" | "double" => Field::Real,
        other => return Err(err(line_no, format!("unsupported field '{other}'"))),
    };
    let symmetric = match tokens[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(err(line_no, format!("unsupported symmetry '{other}'"))),
    };

    let mut size: Option<(usize, usize)> = None;
    let mut triplets = Vec::new();
    let mut last_line = line_no;
    for (n, line) in lines {
        last_line = n;
        let line = line.map_err(|e| ProblemError::Io(e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = trimmed.split_whitespace().collect();
        let Some((rows, expected)) = size else {
            if parts.len() != 3 {
                return Err(err(n, "size line must hold rows, columns and entry count".into()));
            }
            let nums: Vec<usize> = parts
                .iter()
                .map(|p| p.parse().map_err(|_| err(n, format!("invalid integer '{p}'"))))
                .collect::<Result<_>>()?;
            if nums[0] != nums[1] {
                return Err(err(n, format!("matrix is {}x{}, not square", nums[0], nums[1])));
            }
            if nums[0] == 0 || nums[2] == 0 {
                return Err(ProblemError::EmptyMatrix);
            }
            size = Some((nums[0], nums[2]));
            triplets.reserve(nums[2]);
            continue;
        };
        let want = if field == Field::Pattern { 2 } else { 3 };
        if parts.len() != want {
            return Err(err(n, format!("expected {want} fields, found {}", parts.len())));
        }
        let index = |p: &str| -> Result<usize> {
            let v: usize = p.parse().map_err(|_| err(n, format!("invalid index '{p}'")))?;
            if v == 0 || v > rows {
                return Err(err(n, format!("index {v} outside 1..={rows}")));
            }
            Ok(v - 1)
        };
        let (i, j) = (index(parts[0])?, index(parts[1])?);
        let v = if field == Field::Pattern {
            1.0
        } else {
            let v: f64 = parts[2].parse().map_err(|_| err(n, format!("invalid value '{}'", parts[2])))?;
            if !(v >= 0.0) || !v.is_finite() {
                return Err(err(n, format!("entry {v} is not a nonnegative weight")));
            }
            v
        };
        if triplets.len() >= expected * 2 {
            return Err(err(n, format!("more than {expected} entries")));
        }
        triplets.push((i, j, v));
        if symmetric && i != j {
            triplets.push((j, i, v));
        }
    }
    let Some((rows, expected)) = size else {
        return Err(err(last_line, "missing size line".into()));
    };
    let stored = triplets.iter().filter(|(i, j, _)| !symmetric || i >= j).count();
    if stored != expected {
        return Err(err(last_line, format!("expected {expected} entries, found {stored}")));
    }
    SparseStochasticMatrix::from_triplets(rows, &triplets)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<SparseStochasticMatrix> {
        parse_matrix_market(s.as_bytes())
    }

    #[test]
    fn pattern_with_dangling_column() {
        let m = parse("%%MatrixMarket matrix coordinate pattern general\n% comment\n2 2 2\n1 1\n2 1\n").unwrap();
        let d = m.to_dense();
        assert_eq!(d.column(0).as_slice(), &[0.5, 0.5]);
        assert_eq!(d.column(1).as_slice(), &[0.5, 0.5]);
        assert_eq!(m.dangling_columns(), &[1]);
    }

    #[test]
    fn stochastic_input_is_unchanged() {
        let m = parse("%%MatrixMarket matrix coordinate real general\n3 3 4\n1 1 0.25\n2 1 0.75\n3 2 1.0\n1 3 1\n").unwrap();
        let d = m.to_dense();
        assert!((d[(0, 0)] - 0.25).abs() <= 1e-15);
        assert!((d[(1, 0)] - 0.75).abs() <= 1e-15);
        assert_eq!(d[(2, 1)], 1.0);
    }

    #[test]
    fn symmetric_is_mirrored() {
        let m = parse("%%MatrixMarket matrix coordinate pattern symmetric\n3 3 2\n2 1\n3 3\n").unwrap();
        let d = m.to_dense();
        assert_eq!(d[(0, 1)], 1.0);
        assert_eq!(d[(1, 0)], 1.0);
        assert_eq!(d[(2, 2)], 1.0);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse("%%MatrixMarket matrix coordinate pattern general\n2 2 1\n1 x\n").unwrap_err();
        assert_eq!(e, ProblemError::ParseError { line: 3, message: "invalid index 'x'".into() });
        let e = parse("%%MatrixMarket matrix coordinate pattern general\n2 2 1\n3 1\n").unwrap_err();
        assert!(matches!(e, ProblemError::ParseError { line: 3, .. }));
        let e = parse("%%MatrixMarket matrix array real general\n").unwrap_err();
        assert!(matches!(e, ProblemError::ParseError { line: 1, .. }));
        let e = parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 -3\n").unwrap_err();
        assert!(matches!(e, ProblemError::ParseError { line: 3, .. }));
        let e = parse("%%MatrixMarket matrix coordinate pattern general\n2 2 2\n1 1\n").unwrap_err();
        assert!(matches!(e, ProblemError::ParseError { .. }));
    }

    #[test]
    fn empty_inputs() {
        assert_eq!(parse(""), Err(ProblemError::EmptyMatrix));
        assert_eq!(
            parse("%%MatrixMarket matrix coordinate pattern general\n3 3 0\n"),
            Err(ProblemError::EmptyMatrix)
        );
    }
}
