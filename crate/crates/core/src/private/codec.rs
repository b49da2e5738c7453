use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{FromPrimitive, ToPrimitive};

use crate::error::{Error, Result};
use crate::private::paillier::PublicKey;

pub const DEFAULT_SCALE_BITS: u32 = 40;

/// Signed fixed-point encoding into `Z_N`: `x -> round(x * 2^s) mod N`.
/// Residues above `N/2` decode as negative; encoded magnitudes must stay
/// below `N/4` so one masked addition cannot wrap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedPointCodec {
    pub scale_bits: u32,
    modulus: BigUint,
    half: BigUint,
    quarter: BigUint,
}

impl FixedPointCodec {
    pub fn new(pk: &PublicKey) -> Self {
        Self::with_scale(pk, DEFAULT_SCALE_BITS)
    }

    pub fn with_scale(pk: &PublicKey, scale_bits: u32) -> Self {
        FixedPointCodec {
            scale_bits,
            modulus: pk.n.clone(),
            half: &pk.n >> 1u32,
            quarter: &pk.n >> 2u32,
        }
    }

    pub fn scale(&self) -> f64 {
        (self.scale_bits as f64).exp2()
    }

    /// The fixed-point integer `round(x * 2^s)`, without reduction mod N.
    pub fn quantize(&self, x: f64) -> Result<BigInt> {
        let scaled = (x * self.scale()).round();
        let v = BigInt::from_f64(scaled).ok_or(Error::Overflow(x))?;
        if v.magnitude() >= &self.quarter {
            return Err(Error::Overflow(x));
        }
        Ok(v)
    }

    pub fn encode(&self, x: f64) -> Result<BigUint> {
        Ok(self.to_residue(&self.quantize(x)?))
    }

    pub fn to_residue(&self, v: &BigInt) -> BigUint {
        match v.sign() {
            Sign::Minus => &self.modulus - (v.magnitude() % &self.modulus),
            _ => v.magnitude() % &self.modulus,
        }
    }

    /// Signed integer represented by a residue.
    pub fn decode_int(&self, m: &BigUint) -> BigInt {
        if m > &self.half {
            -BigInt::from(&self.modulus - m)
        } else {
            BigInt::from(m.clone())
        }
    }

    /// Signed residue as an `i128`, failing when it leaves that range.
    pub fn decode_i128(&self, m: &BigUint) -> Result<i128> {
        let v = self.decode_int(m);
        v.to_i128()
            .ok_or_else(|| Error::Overflow(v.to_f64().unwrap_or(f64::INFINITY) / self.scale()))
    }

    pub fn decode(&self, m: &BigUint) -> f64 {
        self.decode_int(m).to_f64().unwrap_or(f64::NAN) / self.scale()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn codec() -> FixedPointCodec {
        let n = BigUint::from(2u32).pow(200) + 235u32;
        FixedPointCodec::new(&PublicKey::from_modulus(n))
    }

    #[test]
    fn round_trips_signed_values() {
        let c = codec();
        for x in [0.0, 1.5, -1.5, 1e-9, -123.456789, 3.0e6] {
            let d = c.decode(&c.encode(x).unwrap());
            assert!((d - x).abs() <= 0.5 / c.scale(), "{x} -> {d}");
        }
        assert_eq!(
            c.decode_i128(&c.encode(-2.0).unwrap()).unwrap(),
            -(1i128 << 41)
        );
    }

    #[test]
    fn headroom_violation() {
        let c = codec();
        let limit = 2f64.powi(198 - 40);
        assert!(c.encode(limit * 0.99).is_ok());
        assert!(matches!(c.encode(limit * 1.01), Err(Error::Overflow(_))));
        assert!(c.encode(f64::NAN).is_err());
    }
}
