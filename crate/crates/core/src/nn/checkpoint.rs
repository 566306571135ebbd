//! Binary parameter files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic       8 bytes  "SWQNET01"
//! head        u32      0 = plain, 1 = dueling
//! activation  u32      0 = leaky rectifier, 1 = rectifier
//! layers      u32
//! shapes      layers x (u32 inputs, u32 outputs)
//! values      per layer: weights (inputs x outputs, row-major) then bias, f64
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::{Activation, Head, Layer, NnError, QNetwork};

pub const MAGIC: &[u8; 8] = b"SWQNET01";

type Result<T> = std::result::Result<T, NnError>;

fn io_err(path: &str) -> impl Fn(std::io::Error) -> NnError + '_ {
    move |source| NnError::Io {
        path: path.to_string(),
        source,
    }
}

pub fn write_to<W: Write>(net: &QNetwork, mut w: W) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    let head: u32 = match net.head {
        Head::Plain => 0,
        Head::Dueling => 1,
    };
    let act: u32 = match net.activation {
        Activation::LeakyRelu => 0,
        Activation::Relu => 1,
    };
    w.write_all(&head.to_le_bytes())?;
    w.write_all(&act.to_le_bytes())?;
    w.write_all(&(net.layers.len() as u32).to_le_bytes())?;
    for l in &net.layers {
        w.write_all(&(l.inputs as u32).to_le_bytes())?;
        w.write_all(&(l.outputs as u32).to_le_bytes())?;
    }
    for l in &net.layers {
        for v in l.weights.iter().chain(&l.bias) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> std::io::Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    let mut b = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut b)?;
        out.push(f64::from_le_bytes(b));
    }
    Ok(out)
}

pub fn read_from<R: Read>(mut r: R, origin: &str) -> Result<QNetwork> {
    let err = io_err(origin);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(&err)?;
    if &magic != MAGIC {
        return Err(NnError::Format(format!("{origin}: bad magic")));
    }
    let head = match read_u32(&mut r).map_err(&err)? {
        0 => Head::Plain,
        1 => Head::Dueling,
        h => return Err(NnError::Format(format!("{origin}: unknown head kind {h}"))),
    };
    let activation = match read_u32(&mut r).map_err(&err)? {
        0 => Activation::LeakyRelu,
        1 => Activation::Relu,
        a => return Err(NnError::Format(format!("{origin}: unknown activation {a}"))),
    };
    let count = read_u32(&mut r).map_err(&err)? as usize;
    if count == 0 || count > 64 {
        return Err(NnError::Format(format!("{origin}: implausible layer count {count}")));
    }
    let mut shapes = Vec::with_capacity(count);
    for _ in 0..count {
        let i = read_u32(&mut r).map_err(&err)? as usize;
        let o = read_u32(&mut r).map_err(&err)? as usize;
        shapes.push((i, o));
    }
    if shapes.windows(2).any(|w| w[0].1 != w[1].0) {
        return Err(NnError::Format(format!("{origin}: layer shapes do not chain")));
    }
    let mut layers = Vec::with_capacity(count);
    for (inputs, outputs) in shapes {
        let weights = read_f64s(&mut r, inputs * outputs).map_err(&err)?;
        let bias = read_f64s(&mut r, outputs).map_err(&err)?;
        layers.push(Layer {
            inputs,
            outputs,
            weights,
            bias,
        });
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(&err)? != 0 {
        return Err(NnError::Format(format!("{origin}: trailing bytes")));
    }
    Ok(QNetwork {
        layers,
        head,
        activation,
    })
}

pub fn save(net: &QNetwork, path: &Path) -> Result<()> {
    let shown = path.display().to_string();
    let file = std::fs::File::create(path).map_err(io_err(&shown))?;
    write_to(net, std::io::BufWriter::new(file)).map_err(io_err(&shown))
}

pub fn load(path: &Path) -> Result<QNetwork> {
    let shown = path.display().to_string();
    let file = std::fs::File::open(path).map_err(io_err(&shown))?;
    read_from(std::io::BufReader::new(file), &shown)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut net = QNetwork::new(7, &[3, 4], 5, Head::Dueling, Activation::LeakyRelu, &mut rng);
        net.layers[0].weights[0] = -0.0;
        net.layers[1].bias[2] = f64::MIN_POSITIVE / 3.0;
        let mut buf = Vec::new();
        write_to(&net, &mut buf).unwrap();
        let back = read_from(&buf[..], "buffer").unwrap();
        let mut buf2 = Vec::new();
        write_to(&back, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
        assert_eq!(back.layers[0].weights[0].to_bits(), (-0.0f64).to_bits());
    }

    #[test]
    fn rejects_corruption() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = QNetwork::new(2, &[2], 2, Head::Plain, Activation::Relu, &mut rng);
        let mut buf = Vec::new();
        write_to(&net, &mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_from(&bad[..], "b"), Err(NnError::Format(_))));
        assert!(read_from(&buf[..buf.len() - 3], "b").is_err());
        buf.push(0);
        assert!(matches!(read_from(&buf[..], "b"), Err(NnError::Format(_))));
    }
}
