//! Text checkpoint format for [`FlowStack`].
//!
//! ```text
//! slowflow-checkpoint 1
//! scalar f64
//! d 4
//! layers 3
//! slow_flow 1
//! layer 0 slow
//! layer 1 coupling mask 1010 clamp 4008000000000000 scale 2,64,64,2 shift 2,64,64,2
//! tensor 2 64 3fb99999a0000000 ...
//! ...
//! ```
//!
//! Each coupling header is followed by its tensors in parameter order
//! (scale net `w0 b0 w1 b1 ...`, then shift net). Every scalar is written
//! as the 16 hex digits of its IEEE-754 `f64` bit pattern, so a save/load
//! cycle reproduces the stack bit for bit.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::ad::{Matrix, Mlp};
use crate::error::{Error, Result};
use crate::flows::coupling::AffineCoupling;
use crate::flows::slow::SlowFlow;
use crate::flows::stack::{FlowLayer, FlowStack};
use crate::scalar::Real;

const MAGIC: &str = "slowflow-checkpoint 1";

fn scalar_name<T: Real>() -> &'static str {
    std::any::type_name::<T>()
}

fn hex<T: Real>(v: T) -> String {
    format!("{:016x}", v.as_f64().to_bits())
}

fn unhex<T: Real>(s: &str) -> Result<T> {
    let bits = u64::from_str_radix(s, 16).map_err(|e| Error::Format(format!("bad scalar `{s}`: {e}")))?;
    Ok(T::lit(f64::from_bits(bits)))
}

fn sizes(net: &Mlp<impl Real>) -> String {
    net.layer_sizes()
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

pub fn to_string<T: Real>(stack: &FlowStack<T>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "scalar {}", scalar_name::<T>());
    let _ = writeln!(out, "d {}", stack.dim());
    let _ = writeln!(out, "layers {}", stack.len());
    let _ = writeln!(out, "slow_flow {}", u8::from(stack.has_slow_flow()));
    for (i, layer) in stack.layers().iter().enumerate() {
        match layer {
            FlowLayer::Slow(_) => {
                let _ = writeln!(out, "layer {i} slow");
            }
            FlowLayer::Coupling(c) => {
                let mask: String = c.mask().iter().map(|&m| if m { '1' } else { '0' }).collect();
                let _ = writeln!(
                    out,
                    "layer {i} coupling mask {mask} clamp {} scale {} shift {}",
                    hex(c.scale_clamp()),
                    sizes(c.scale_net()),
                    sizes(c.shift_net())
                );
                for p in c.params() {
                    let _ = write!(out, "tensor {} {}", p.rows(), p.cols());
                    for &v in p.as_slice() {
                        let _ = write!(out, " {}", hex(v));
                    }
                    out.push('\n');
                }
            }
        }
    }
    out
}

pub fn save<T: Real, W: Write>(stack: &FlowStack<T>, mut w: W) -> Result<()> {
    w.write_all(to_string(stack).as_bytes())?;
    Ok(())
}

pub fn save_path<T: Real>(stack: &FlowStack<T>, path: &Path) -> Result<()> {
    crate::io::write_atomic(path, to_string(stack).as_bytes())
}

struct Lines<'a> {
    inner: std::str::Lines<'a>,
    no: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str> {
        self.no += 1;
        self.inner
            .next()
            .ok_or_else(|| Error::Format(format!("unexpected end of file at line {}", self.no)))
    }

    fn keyed(&mut self, key: &str) -> Result<&'a str> {
        let line = self.next()?;
        line.strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| Error::Format(format!("line {}: expected `{key}`, got `{line}`", self.no)))
    }
}

fn parse_usize(s: &str) -> Result<usize> {
    s.parse().map_err(|_| Error::Format(format!("bad count `{s}`")))
}

fn parse_sizes(s: &str) -> Result<Vec<usize>> {
    s.split(',').map(parse_usize).collect()
}

fn read_tensor<T: Real>(lines: &mut Lines<'_>) -> Result<Matrix<T>> {
    let body = lines.keyed("tensor")?;
    let mut it = body.split_ascii_whitespace();
    let rows = parse_usize(it.next().unwrap_or(""))?;
    let cols = parse_usize(it.next().unwrap_or(""))?;
    let data = it.map(unhex::<T>).collect::<Result<Vec<_>>>()?;
    Matrix::new(rows, cols, data).map_err(|_| Error::Format(format!("line {}: tensor size mismatch", lines.no)))
}

fn read_mlp<T: Real>(lines: &mut Lines<'_>, sizes: &[usize]) -> Result<Mlp<T>> {
    let (mut w, mut b) = (Vec::new(), Vec::new());
    for _ in 1..sizes.len() {
        w.push(read_tensor(lines)?);
        b.push(read_tensor(lines)?);
    }
    let net = Mlp::from_parts(w, b)?;
    if net.layer_sizes() != sizes {
        return Err(Error::Format(format!(
            "network sizes {:?} disagree with header {sizes:?}",
            net.layer_sizes()
        )));
    }
    Ok(net)
}

pub fn from_str<T: Real>(text: &str) -> Result<FlowStack<T>> {
    let mut lines = Lines {
        inner: text.lines(),
        no: 0,
    };
    if lines.next()? != MAGIC {
        return Err(Error::Format("missing checkpoint header".into()));
    }
    let scalar = lines.keyed("scalar")?;
    if scalar != scalar_name::<T>() {
        return Err(Error::Format(format!(
            "checkpoint scalar `{scalar}` does not match `{}`",
            scalar_name::<T>()
        )));
    }
    let d = parse_usize(lines.keyed("d")?)?;
    let n_layers = parse_usize(lines.keyed("layers")?)?;
    let slow_flag = lines.keyed("slow_flow")? == "1";
    let mut stack = FlowStack::identity(d);
    for i in 0..n_layers {
        let header = lines.keyed("layer")?;
        let f: Vec<&str> = header.split_ascii_whitespace().collect();
        if f.first().map(|s| parse_usize(s)).transpose()? != Some(i) {
            return Err(Error::Format(format!("expected layer {i}, got `{header}`")));
        }
        match f.get(1).copied() {
            Some("slow") => stack.push(FlowLayer::Slow(SlowFlow))?,
            Some("coupling") if f.len() == 10 && f[2] == "mask" && f[4] == "clamp" && f[6] == "scale" && f[8] == "shift" => {
                let mask: Vec<bool> = f[3].chars().map(|c| c == '1').collect();
                let clamp = unhex::<T>(f[5])?;
                let scale = read_mlp(&mut lines, &parse_sizes(f[7])?)?;
                let shift = read_mlp(&mut lines, &parse_sizes(f[9])?)?;
                stack.push(FlowLayer::Coupling(AffineCoupling::new(mask, scale, shift, clamp)?))?;
            }
            _ => return Err(Error::Format(format!("bad layer header `{header}`"))),
        }
    }
    if stack.has_slow_flow() != slow_flag {
        return Err(Error::Format("slow_flow flag disagrees with layers".into()));
    }
    Ok(stack)
}

pub fn load<T: Real, R: BufRead>(mut r: R) -> Result<FlowStack<T>> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    from_str(&text)
}

pub fn load_path<T: Real>(path: &Path) -> Result<FlowStack<T>> {
    from_str(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ad::Init;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let stack = FlowStack::<f64>::realnvp(5, 3, &[7, 3], Init::Normal(0.9), false, &mut rng)
            .unwrap()
            .with_slow_flow();
        let text = to_string(&stack);
        let back: FlowStack<f64> = from_str(&text).unwrap();
        assert_eq!(back, stack);
        assert_eq!(to_string(&back), text);
    }

    #[test]
    fn f32_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let stack = FlowStack::<f32>::realnvp(3, 2, &[4], Init::FanIn, false, &mut rng).unwrap();
        let back: FlowStack<f32> = from_str(&to_string(&stack)).unwrap();
        assert_eq!(back, stack);
        assert!(from_str::<f64>(&to_string(&stack)).is_err());
    }

    #[test]
    fn truncated_file_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let stack = FlowStack::<f64>::realnvp(2, 2, &[3], Init::FanIn, false, &mut rng).unwrap();
        let text = to_string(&stack);
        let cut = &text[..text.len() / 2];
        assert!(matches!(from_str::<f64>(cut), Err(Error::Format(_))));
    }
}
