//! Binary network checkpoint.
//!
//! Byte layout, all integers and floats little-endian:
//!
//! | field            | type              |
//! |------------------|-------------------|
//! | magic            | 8 bytes `AOIDNET1`|
//! | layer count `L`  | u32               |
//! | layer sizes      | `L` x u32         |
//! | activations      | `L-1` x u8 (0 identity, 1 relu, 2 tanh) |
//! | parameter count  | u64               |
//! | parameters       | f64 each, in the network's flat layout |

use std::io::{Read, Write};

use super::{Activation, DenseNet};
use crate::error::{Error, Result};

pub const NET_MAGIC: &[u8; 8] = b"AOIDNET1";

pub fn write_net<W: Write>(net: &DenseNet, out: &mut W) -> Result<()> {
    out.write_all(NET_MAGIC)?;
    out.write_all(&(net.layer_sizes().len() as u32).to_le_bytes())?;
    for &size in net.layer_sizes() {
        out.write_all(&(size as u32).to_le_bytes())?;
    }
    for act in net.activations() {
        out.write_all(&[act.code()])?;
    }
    out.write_all(&(net.parameters().len() as u64).to_le_bytes())?;
    for p in net.parameters() {
        out.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

pub(crate) fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    input.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

pub(crate) fn read_u64<R: Read>(input: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

pub(crate) fn read_f64<R: Read>(input: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

pub fn read_net<R: Read>(input: &mut R) -> Result<DenseNet> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != NET_MAGIC {
        return Err(Error::Checkpoint("bad network magic".into()));
    }
    let layers = read_u32(input)? as usize;
    if !(2..=64).contains(&layers) {
        return Err(Error::Checkpoint(format!("implausible layer count {layers}")));
    }
    let sizes = (0..layers)
        .map(|_| read_u32(input).map(|s| s as usize))
        .collect::<Result<Vec<_>>>()?;
    let mut codes = vec![0u8; layers - 1];
    input.read_exact(&mut codes)?;
    let activations = codes
        .iter()
        .map(|&c| {
            Activation::from_code(c)
                .ok_or_else(|| Error::Checkpoint(format!("unknown activation code {c}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let count = read_u64(input)? as usize;
    if count != DenseNet::param_count(&sizes) {
        return Err(Error::Checkpoint(format!(
            "parameter count {count} does not match layer sizes {sizes:?}"
        )));
    }
    let params = (0..count)
        .map(|_| read_f64(input))
        .collect::<Result<Vec<_>>>()?;
    DenseNet::from_parameters(&sizes, &activations, params)
        .map_err(|e| Error::Checkpoint(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut r = rng::seeded(5);
        let net = DenseNet::new(
            &[3, 5, 2],
            &[Activation::Relu, Activation::Tanh],
            &mut r,
        )
        .unwrap();
        let mut bytes = Vec::new();
        write_net(&net, &mut bytes).unwrap();
        assert_eq!(bytes.len(), 8 + 4 + 3 * 4 + 2 + 8 + 8 * net.parameters().len());
        let back = read_net(&mut bytes.as_slice()).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn header_layout() {
        let net = DenseNet::zeros(&[1, 1], &[Activation::Tanh]).unwrap();
        let mut bytes = Vec::new();
        write_net(&net, &mut bytes).unwrap();
        assert_eq!(&bytes[..8], b"AOIDNET1");
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        assert_eq!(&bytes[12..20], &[1, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(bytes[20], 2);
        assert_eq!(&bytes[21..29], &2u64.to_le_bytes());
    }

    #[test]
    fn corrupt_input_rejected() {
        assert!(read_net(&mut &b"NOTANET!"[..]).is_err());
        let net = DenseNet::zeros(&[2, 1], &[Activation::Identity]).unwrap();
        let mut bytes = Vec::new();
        write_net(&net, &mut bytes).unwrap();
        bytes.truncate(bytes.len() - 3);
        assert!(read_net(&mut bytes.as_slice()).is_err());
    }
}
