//! Parity-check matrices over GF(2): construction, text formats, syndromes.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::LdpcError;

/// Dense m x n binary parity-check matrix. Rows are check equations,
/// columns are bit labels. Every row and column carries at least one
/// nonzero entry and there are fewer checks than bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityCheckMatrix {
    rows: usize,
    cols: usize,
    words_per_row: usize,
    words: Vec<u64>,
}

impl ParityCheckMatrix {
    /// Builds and validates a matrix from 0/1 rows.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self, LdpcError> {
        let m = rows.len();
        if m == 0 {
            return Err(LdpcError::Shape("matrix has no rows"));
        }
        let n = rows[0].len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(LdpcError::Shape("ragged rows"));
            }
            if row.iter().any(|&b| b > 1) {
                return Err(LdpcError::Shape("entries must be 0 or 1"));
            }
            if row.iter().all(|&b| b == 0) {
                let _ = i;
                return Err(LdpcError::Shape("zero row"));
            }
        }
        if m >= n {
            return Err(LdpcError::Shape("need more bit columns than checks"));
        }
        for j in 0..n {
            if rows.iter().all(|row| row[j] == 0) {
                return Err(LdpcError::Shape("zero column"));
            }
        }
        let words_per_row = n.div_ceil(64);
        let mut words = alloc::vec![0u64; m * words_per_row];
        for (i, row) in rows.iter().enumerate() {
            for (j, &b) in row.iter().enumerate() {
                if b == 1 {
                    words[i * words_per_row + j / 64] |= 1 << (j % 64);
                }
            }
        }
        Ok(ParityCheckMatrix {
            rows: m,
            cols: n,
            words_per_row,
            words,
        })
    }

    /// Parses the dense text format: a `m n` header line, then m lines of n
    /// space-separated 0/1 digits. Blank lines and `#` comments are skipped.
    pub fn parse_dense(text: &str) -> Result<Self, LdpcError> {
        let mut lines = numbered_lines(text);
        let (header_no, header) = lines
            .next()
            .ok_or_else(|| LdpcError::parse(1, "empty input"))?;
        let dims: Vec<&str> = header.split_whitespace().collect();
        if dims.len() != 2 {
            return Err(LdpcError::parse(header_no, "expected header `m n`"));
        }
        let m: usize = dims[0]
            .parse()
            .map_err(|_| LdpcError::parse(header_no, "bad row count"))?;
        let n: usize = dims[1]
            .parse()
            .map_err(|_| LdpcError::parse(header_no, "bad column count"))?;
        let mut rows = Vec::with_capacity(m);
        for _ in 0..m {
            let (line_no, line) = lines
                .next()
                .ok_or_else(|| LdpcError::parse(header_no, format!("expected {m} rows")))?;
            let mut row = Vec::with_capacity(n);
            for tok in line.split_whitespace() {
                match tok {
                    "0" => row.push(0u8),
                    "1" => row.push(1u8),
                    other => {
                        return Err(LdpcError::parse(
                            line_no,
                            format!("entry `{other}` is not 0 or 1"),
                        ))
                    }
                }
            }
            if row.len() != n {
                return Err(LdpcError::parse(
                    line_no,
                    format!("expected {n} entries, found {}", row.len()),
                ));
            }
            rows.push(row);
        }
        if let Some((line_no, _)) = lines.next() {
            return Err(LdpcError::parse(line_no, "trailing content after matrix"));
        }
        Self::from_rows(&rows).map_err(|e| match e {
            LdpcError::Shape(reason) => LdpcError::parse(header_no, reason),
            other => other,
        })
    }

    /// Parses the alist interchange format used by LDPC tooling: `n m`, max
    /// column/row weights, the weight lists, then 1-based row indices per
    /// column and column indices per row (zero-padded entries allowed).
    pub fn parse_alist(text: &str) -> Result<Self, LdpcError> {
        let mut lines = numbered_lines(text);
        let mut next_ints = |expect: &'static str| -> Result<(usize, Vec<usize>), LdpcError> {
            let (line_no, line) = lines
                .next()
                .ok_or_else(|| LdpcError::parse(usize::MAX, expect))?;
            let mut vals = Vec::new();
            for tok in line.split_whitespace() {
                vals.push(
                    tok.parse::<usize>()
                        .map_err(|_| LdpcError::parse(line_no, format!("bad integer `{tok}`")))?,
                );
            }
            Ok((line_no, vals))
        };
        let (line_no, dims) = next_ints("missing `n m` header")?;
        if dims.len() != 2 {
            return Err(LdpcError::parse(line_no, "expected header `n m`"));
        }
        let (n, m) = (dims[0], dims[1]);
        let _ = next_ints("missing max-weight line")?;
        let (cw_line, col_weights) = next_ints("missing column weights")?;
        if col_weights.len() != n {
            return Err(LdpcError::parse(cw_line, "column weight count mismatch"));
        }
        let (rw_line, row_weights) = next_ints("missing row weights")?;
        if row_weights.len() != m {
            return Err(LdpcError::parse(rw_line, "row weight count mismatch"));
        }
        let mut rows = alloc::vec![alloc::vec![0u8; n]; m];
        for j in 0..n {
            let (line_no, entries) = next_ints("missing column adjacency line")?;
            let nonzero: Vec<usize> = entries.iter().copied().filter(|&v| v != 0).collect();
            if nonzero.len() != col_weights[j] {
                return Err(LdpcError::parse(line_no, "column adjacency weight mismatch"));
            }
            for v in nonzero {
                if v > m {
                    return Err(LdpcError::parse(line_no, "check index out of range"));
                }
                rows[v - 1][j] = 1;
            }
        }
        // The per-row lists are redundant; verify them when present.
        for i in 0..m {
            let Ok((line_no, entries)) = next_ints("") else {
                break;
            };
            let nonzero: Vec<usize> = entries.iter().copied().filter(|&v| v != 0).collect();
            let expected: Vec<usize> = (0..n).filter(|&j| rows[i][j] == 1).map(|j| j + 1).collect();
            if nonzero != expected {
                return Err(LdpcError::parse(line_no, "row adjacency contradicts columns"));
            }
        }
        Self::from_rows(&rows)
    }

    /// The bundled (8,16) demonstration code used throughout the tests,
    /// scenarios and documentation.
    pub fn builtin_8x16() -> Self {
        const ROWS: [[u8; 16]; 8] = [
            [1, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 1, 0, 0],
            [0, 1, 1, 1, 1, 0, 0, 0, 1, 0, 0, 1, 1, 1, 0, 0],
            [1, 0, 1, 0, 0, 1, 1, 0, 0, 1, 1, 1, 0, 0, 0, 0],
            [1, 0, 0, 1, 1, 0, 0, 1, 0, 1, 1, 0, 1, 0, 1, 1],
            [0, 0, 0, 0, 1, 0, 1, 1, 1, 0, 0, 0, 0, 0, 1, 0],
            [0, 0, 0, 0, 0, 1, 0, 1, 0, 1, 0, 0, 0, 1, 0, 1],
            [0, 1, 0, 0, 0, 0, 0, 0, 1, 0, 1, 0, 1, 0, 0, 1],
            [0, 1, 1, 1, 0, 1, 0, 0, 0, 0, 1, 0, 0, 1, 0, 0],
        ];
        let rows: Vec<Vec<u8>> = ROWS.iter().map(|r| r.to_vec()).collect();
        Self::from_rows(&rows).expect("builtin matrix is valid")
    }

    pub fn num_checks(&self) -> usize {
        self.rows
    }

    pub fn num_bits(&self) -> usize {
        self.cols
    }

    pub fn get(&self, check: usize, bit: usize) -> u8 {
        debug_assert!(check < self.rows && bit < self.cols);
        ((self.words[check * self.words_per_row + bit / 64] >> (bit % 64)) & 1) as u8
    }

    /// Bit labels adjacent to a check, ascending.
    pub fn check_neighbors(&self, check: usize) -> Vec<usize> {
        (0..self.cols).filter(|&j| self.get(check, j) == 1).collect()
    }

    /// Checks adjacent to a bit label, ascending.
    pub fn bit_neighbors(&self, bit: usize) -> Vec<usize> {
        (0..self.rows).filter(|&i| self.get(i, bit) == 1).collect()
    }

    pub fn row_weight(&self, check: usize) -> usize {
        (0..self.words_per_row)
            .map(|w| self.words[check * self.words_per_row + w].count_ones() as usize)
            .sum()
    }

    pub fn col_weight(&self, bit: usize) -> usize {
        (0..self.rows).filter(|&i| self.get(i, bit) == 1).count()
    }

    pub(crate) fn row_words(&self, check: usize) -> &[u64] {
        &self.words[check * self.words_per_row..(check + 1) * self.words_per_row]
    }

    /// `H * word^T` over GF(2); all-zero exactly for codewords.
    pub fn syndrome(&self, word: &[u8]) -> Result<Vec<u8>, LdpcError> {
        if word.len() != self.cols {
            return Err(LdpcError::LengthMismatch {
                expected: self.cols,
                got: word.len(),
            });
        }
        Ok((0..self.rows)
            .map(|i| {
                let mut acc = 0u8;
                for j in 0..self.cols {
                    acc ^= self.get(i, j) & (word[j] & 1);
                }
                acc
            })
            .collect())
    }

    /// Renders the dense text format parsed by [`Self::parse_dense`].
    pub fn render_dense(&self) -> String {
        use core::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                if j > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{}", self.get(i, j));
            }
            out.push('\n');
        }
        out
    }

    /// GF(2) rank, by row elimination on a scratch copy.
    pub fn rank(&self) -> usize {
        let mut scratch: Vec<Vec<u64>> = (0..self.rows)
            .map(|i| self.row_words(i).to_vec())
            .collect();
        let mut rank = 0;
        for col in 0..self.cols {
            let (w, b) = (col / 64, col % 64);
            let Some(pivot) = (rank..self.rows).find(|&i| (scratch[i][w] >> b) & 1 == 1) else {
                continue;
            };
            scratch.swap(rank, pivot);
            let pivot_row = scratch[rank].clone();
            for (i, row) in scratch.iter_mut().enumerate() {
                if i != rank && (row[w] >> b) & 1 == 1 {
                    for (x, y) in row.iter_mut().zip(pivot_row.iter()) {
                        *x ^= *y;
                    }
                }
            }
            rank += 1;
            if rank == self.rows {
                break;
            }
        }
        rank
    }
}

/// 1-based (line number, content) pairs, skipping blanks and `#` comments.
fn numbered_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Bipartite adjacency view of a parity-check matrix: bit nodes on one side,
/// check nodes on the other, one edge per nonzero entry.
#[derive(Debug, Clone)]
pub struct TannerGraph {
    bit_adj: Vec<Vec<usize>>,
    check_adj: Vec<Vec<usize>>,
}

impl TannerGraph {
    pub fn from_matrix(h: &ParityCheckMatrix) -> Self {
        let bit_adj = (0..h.num_bits()).map(|j| h.bit_neighbors(j)).collect();
        let check_adj = (0..h.num_checks()).map(|i| h.check_neighbors(i)).collect();
        TannerGraph { bit_adj, check_adj }
    }

    pub fn num_bits(&self) -> usize {
        self.bit_adj.len()
    }

    pub fn num_checks(&self) -> usize {
        self.check_adj.len()
    }

    /// Degree of a bit node: the column weight of its matrix column.
    pub fn bit_degree(&self, bit: usize) -> usize {
        self.bit_adj[bit].len()
    }

    pub fn check_degree(&self, check: usize) -> usize {
        self.check_adj[check].len()
    }

    pub fn bit_checks(&self, bit: usize) -> &[usize] {
        &self.bit_adj[bit]
    }

    pub fn check_bits(&self, check: usize) -> &[usize] {
        &self.check_adj[check]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_matrix_shape() {
        let h = ParityCheckMatrix::builtin_8x16();
        assert_eq!(h.num_checks(), 8);
        assert_eq!(h.num_bits(), 16);
        let row0: Vec<u8> = (0..16).map(|j| h.get(0, j)).collect();
        assert_eq!(row0, [1, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 1, 0, 0]);
        assert_eq!(h.rank(), 8);
        // Column weights as printed.
        let weights: Vec<usize> = (0..16).map(|j| h.col_weight(j)).collect();
        assert_eq!(weights, [3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 4, 2, 3, 4, 2, 3]);
    }

    #[test]
    fn parse_dense_roundtrip() {
        let h = ParityCheckMatrix::builtin_8x16();
        let again = ParityCheckMatrix::parse_dense(&h.render_dense()).unwrap();
        assert_eq!(h, again);
    }

    #[test]
    fn parse_dense_trivial_and_errors() {
        let h = ParityCheckMatrix::parse_dense("1 2\n1 1\n").unwrap();
        assert_eq!((h.num_checks(), h.num_bits()), (1, 2));

        let err = ParityCheckMatrix::parse_dense("1 2\n1 2\n").unwrap_err();
        assert!(matches!(err, LdpcError::Parse { line: 2, .. }), "{err}");

        let err = ParityCheckMatrix::parse_dense("1 3\n1 1\n").unwrap_err();
        assert!(matches!(err, LdpcError::Parse { line: 2, .. }));

        // Zero column (column 3 of both rows).
        let err = ParityCheckMatrix::parse_dense("2 3\n1 1 0\n1 1 0\n").unwrap_err();
        assert!(matches!(err, LdpcError::Parse { line: 1, .. }));

        // As many checks as bits.
        assert!(ParityCheckMatrix::parse_dense("2 2\n1 0\n0 1\n").is_err());
    }

    #[test]
    fn syndrome_basics() {
        let h = ParityCheckMatrix::builtin_8x16();
        let zero = alloc::vec![0u8; 16];
        assert_eq!(h.syndrome(&zero).unwrap(), alloc::vec![0u8; 8]);
        // Flipping bit 6 lights exactly the checks adjacent to column 6.
        let mut word = zero.clone();
        word[6] = 1;
        assert_eq!(
            h.syndrome(&word).unwrap(),
            alloc::vec![1, 0, 1, 0, 1, 0, 0, 0]
        );
        assert!(h.syndrome(&zero[..10]).is_err());
    }

    #[test]
    fn tanner_degrees_match_weights() {
        let h = ParityCheckMatrix::builtin_8x16();
        let g = TannerGraph::from_matrix(&h);
        for j in 0..h.num_bits() {
            assert_eq!(g.bit_degree(j), h.col_weight(j));
        }
        for i in 0..h.num_checks() {
            assert_eq!(g.check_degree(i), h.row_weight(i));
        }
        assert_eq!(g.check_bits(0), &[0, 6, 13]);
        assert_eq!(g.bit_checks(6), &[0, 2, 4]);
    }

    #[test]
    fn alist_parse_matches_builtin() {
        let alist = "\
16 8
4 9
3 3 3 3 3 3 3 3 3 3 4 2 3 4 2 3
3 8 7 9 5 5 5 6
1 3 4 0
2 7 8 0
2 3 8 0
2 4 8 0
2 4 5 0
3 6 8 0
1 3 5 0
4 5 6 0
2 5 7 0
3 4 6 0
3 4 7 8
2 3 0 0
2 4 7 0
1 2 6 8
4 5 0 0
4 6 7 0
1 7 14 0 0 0 0 0 0
2 3 4 5 9 12 13 14 0
1 3 6 7 10 11 12 0 0
1 4 5 8 10 11 13 15 16
5 7 8 9 15 0 0 0 0
6 8 10 14 16 0 0 0 0
2 9 11 13 16 0 0 0 0
2 3 4 6 11 14 0 0 0
";
        let h = ParityCheckMatrix::parse_alist(alist).unwrap();
        assert_eq!(h, ParityCheckMatrix::builtin_8x16());

        let bad = "16 8\n4 9\n1 1\n1 1\n";
        assert!(ParityCheckMatrix::parse_alist(bad).is_err());
    }
}
