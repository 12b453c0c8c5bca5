//! Bell-index algebra.
//!
//! Index `2p + q` names `(I ⊗ X^q Z^p)|Φ+⟩`: 0 = Φ+, 1 = Ψ+, 2 = Φ-, 3 = Ψ-.

pub type BellIndex = u8;

/// Bell index of the pair left after swapping the inner qubits of pairs
/// `b1` and `b2` with measurement outcome `m`.
#[inline]
pub fn compose_bell(b1: BellIndex, b2: BellIndex, m: BellIndex) -> BellIndex {
    (b1 ^ b2 ^ m) & 3
}

pub fn bell_name(b: BellIndex) -> &'static str {
    ["phi+", "psi+", "phi-", "psi-"][(b & 3) as usize]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(compose_bell(0, 0, 0), 0);
        for b in 0..4 {
            assert_eq!(compose_bell(b, 0, 0), b);
        }
        assert_eq!(compose_bell(1, 2, 3), 0);
    }

    #[test]
    fn group_laws() {
        for a in 0..4 {
            for b in 0..4 {
                assert_eq!(compose_bell(a, b, 0), compose_bell(b, a, 0));
                assert_eq!(compose_bell(a, a, 0), 0);
                for c in 0..4 {
                    let l = compose_bell(compose_bell(a, b, 0), c, 0);
                    let r = compose_bell(a, compose_bell(b, c, 0), 0);
                    assert_eq!(l, r);
                }
            }
        }
    }
}
