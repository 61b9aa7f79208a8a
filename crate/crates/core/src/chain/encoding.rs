//! Canonical binary encoding: every field is a big-endian `u32` length
//! followed by its octets, fields in declaration order. Integers are
//! encoded as 8-octet big-endian values.

use super::ChainError;

#[derive(Debug, Default, Clone)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(mut self, field: &[u8]) -> Self {
        self.buf.extend_from_slice(&(field.len() as u32).to_be_bytes());
        self.buf.extend_from_slice(field);
        self
    }

    pub fn u64(self, v: u64) -> Self {
        self.bytes(&v.to_be_bytes())
    }

    pub fn str(self, s: &str) -> Self {
        self.bytes(s.as_bytes())
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

#[derive(Debug, Clone)]
pub struct Decoder<'a> {
    rest: &'a [u8],
}

impl<'a> Decoder<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Decoder { rest: data }
    }

    pub fn is_empty(&self) -> bool {
        self.rest.is_empty()
    }

    pub fn bytes(&mut self) -> Result<&'a [u8], ChainError> {
        if self.rest.len() < 4 {
            return Err(ChainError::Decode("truncated length prefix"));
        }
        let (len, rest) = self.rest.split_at(4);
        let len = u32::from_be_bytes(len.try_into().expect("4 octets")) as usize;
        if rest.len() < len {
            return Err(ChainError::Decode("truncated field"));
        }
        let (field, rest) = rest.split_at(len);
        self.rest = rest;
        Ok(field)
    }

    pub fn array<const N: usize>(&mut self) -> Result<[u8; N], ChainError> {
        self.bytes()?
            .try_into()
            .map_err(|_| ChainError::Decode("fixed-size field has the wrong length"))
    }

    pub fn u64(&mut self) -> Result<u64, ChainError> {
        Ok(u64::from_be_bytes(self.array::<8>()?))
    }

    pub fn string(&mut self) -> Result<String, ChainError> {
        String::from_utf8(self.bytes()?.to_vec()).map_err(|_| ChainError::Decode("field is not utf-8"))
    }

    pub fn end(&self) -> Result<(), ChainError> {
        if self.rest.is_empty() {
            Ok(())
        } else {
            Err(ChainError::Decode("trailing octets"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn fields_round_trip(fields in prop::collection::vec(prop::collection::vec(any::<u8>(), 0..40), 0..8), n: u64) {
            let mut enc = Encoder::new().u64(n);
            for f in &fields {
                enc = enc.bytes(f);
            }
            let buf = enc.finish();
            let mut dec = Decoder::new(&buf);
            prop_assert_eq!(dec.u64().unwrap(), n);
            for f in &fields {
                prop_assert_eq!(dec.bytes().unwrap(), f.as_slice());
            }
            prop_assert!(dec.end().is_ok());
        }
    }

    #[test]
    fn truncation_is_an_error() {
        let buf = Encoder::new().str("hello").finish();
        assert!(Decoder::new(&buf[..6]).bytes().is_err());
        assert!(Decoder::new(&buf[..2]).bytes().is_err());
    }
}
