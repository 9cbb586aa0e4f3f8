//! Independent reference encoder: Gaussian elimination to systematic form,
//! then direct parity computation. Deliberately shares nothing with the
//! pseudo-tree encoding path so the two can check each other.

use alloc::vec::Vec;

use super::matrix::ParityCheckMatrix;
use super::LdpcError;

/// Encodes `info` with the systematic positions chosen by left-to-right
/// elimination: the first linearly independent columns become dependent
/// (parity) positions and the remaining free columns carry the info bits in
/// ascending label order.
pub fn oracle_encode(h: &ParityCheckMatrix, info: &[u8]) -> Result<Vec<u8>, LdpcError> {
    let eliminated = Rref::compute(h, None)?;
    eliminated.extend(h, info)
}

/// Like [`oracle_encode`] but with the caller's info positions. Fails when
/// the complementary columns are not invertible, i.e. the positions do not
/// form an information set of the code.
pub fn oracle_encode_at(
    h: &ParityCheckMatrix,
    info_positions: &[usize],
    info: &[u8],
) -> Result<Vec<u8>, LdpcError> {
    let eliminated = Rref::compute(h, Some(info_positions))?;
    if eliminated.free != info_positions {
        return Err(LdpcError::NotAnInformationSet);
    }
    eliminated.extend(h, info)
}

/// Reduced row-echelon form of H with the pivot columns recorded.
struct Rref {
    rows: Vec<Vec<u64>>,
    pivots: Vec<usize>, // pivots[r] = column of row r's pivot
    free: Vec<usize>,
}

impl Rref {
    /// `excluded`: columns barred from pivoting (the desired info set).
    fn compute(h: &ParityCheckMatrix, excluded: Option<&[usize]>) -> Result<Self, LdpcError> {
        let (m, n) = (h.num_checks(), h.num_bits());
        let mut rows: Vec<Vec<u64>> = (0..m).map(|i| h.row_words(i).to_vec()).collect();
        let mut pivots = Vec::with_capacity(m);
        for col in 0..n {
            if excluded.is_some_and(|ex| ex.contains(&col)) {
                continue;
            }
            let rank = pivots.len();
            let (w, b) = (col / 64, col % 64);
            let Some(pivot) = (rank..m).find(|&i| (rows[i][w] >> b) & 1 == 1) else {
                continue;
            };
            rows.swap(rank, pivot);
            let pivot_row = rows[rank].clone();
            for (i, row) in rows.iter_mut().enumerate() {
                if i != rank && (row[w] >> b) & 1 == 1 {
                    for (x, y) in row.iter_mut().zip(pivot_row.iter()) {
                        *x ^= *y;
                    }
                }
            }
            pivots.push(col);
            if pivots.len() == m {
                break;
            }
        }
        if pivots.len() < m {
            if excluded.is_some() && h.rank() == m {
                return Err(LdpcError::NotAnInformationSet);
            }
            // Rows that eliminated to zero witness the dependencies.
            let zero_rows: Vec<usize> = rows
                .iter()
                .enumerate()
                .filter(|(_, r)| r.iter().all(|&w| w == 0))
                .map(|(i, _)| i)
                .collect();
            return Err(LdpcError::RankDeficient { zero_rows });
        }
        let free = (0..n).filter(|c| !pivots.contains(c)).collect();
        Ok(Rref { rows, pivots, free })
    }

    fn extend(&self, h: &ParityCheckMatrix, info: &[u8]) -> Result<Vec<u8>, LdpcError> {
        if info.len() != self.free.len() {
            return Err(LdpcError::LengthMismatch {
                expected: self.free.len(),
                got: info.len(),
            });
        }
        let n = h.num_bits();
        let mut word = alloc::vec![0u8; n];
        for (&pos, &bit) in self.free.iter().zip(info.iter()) {
            word[pos] = bit & 1;
        }
        // In reduced echelon form each pivot bit equals the XOR of the free
        // bits on its row.
        for (r, &pivot_col) in self.pivots.iter().enumerate() {
            let mut acc = 0u8;
            for &fc in &self.free {
                if (self.rows[r][fc / 64] >> (fc % 64)) & 1 == 1 {
                    acc ^= word[fc];
                }
            }
            word[pivot_col] = acc;
        }
        debug_assert!(h.syndrome(&word).unwrap().iter().all(|&s| s == 0));
        Ok(word)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_info_gives_zero_word() {
        let h = ParityCheckMatrix::builtin_8x16();
        assert_eq!(oracle_encode(&h, &[0; 8]).unwrap(), alloc::vec![0u8; 16]);
    }

    #[test]
    fn repetition_code() {
        let h = ParityCheckMatrix::parse_dense("1 2\n1 1\n").unwrap();
        assert_eq!(oracle_encode(&h, &[1]).unwrap(), alloc::vec![1u8, 1]);
        assert_eq!(oracle_encode(&h, &[0]).unwrap(), alloc::vec![0u8, 0]);
    }

    #[test]
    fn outputs_have_zero_syndrome() {
        let h = ParityCheckMatrix::builtin_8x16();
        for pattern in [0u16, 1, 0b10110100, 0xff, 0b01010101] {
            let info: alloc::vec::Vec<u8> = (0..8).map(|i| ((pattern >> i) & 1) as u8).collect();
            let word = oracle_encode(&h, &info).unwrap();
            assert!(h.syndrome(&word).unwrap().iter().all(|&s| s == 0));
        }
    }

    #[test]
    fn rank_deficient_matrix_is_reported() {
        // Last row is the sum of the first two.
        let h = ParityCheckMatrix::from_rows(&[
            alloc::vec![1, 1, 0, 0, 1],
            alloc::vec![0, 1, 1, 0, 1],
            alloc::vec![1, 0, 1, 0, 0],
            alloc::vec![0, 0, 0, 1, 1],
        ])
        .unwrap();
        let err = oracle_encode(&h, &[0, 0]).unwrap_err();
        match err {
            LdpcError::RankDeficient { zero_rows } => assert!(!zero_rows.is_empty()),
            other => panic!("expected rank error, got {other}"),
        }
    }

    #[test]
    fn invalid_information_set_is_rejected() {
        let h = ParityCheckMatrix::builtin_8x16();
        // Columns 11 and 13 are equal in every codeword, so any position set
        // containing both cannot be an information set.
        let err = oracle_encode_at(&h, &[4, 5, 6, 9, 10, 11, 13, 14], &[0; 8]).unwrap_err();
        assert!(matches!(err, LdpcError::NotAnInformationSet));
    }
}
