//! Checkpoint files: magic "EFDQ", version, layer sizes, network weights and
//! biases, Adam moments, then a plain-text key=value metadata block.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::adam::AdamState;
use super::mlp::Mlp;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"EFDQ";
const VERSION: u32 = 1;

/// Bookkeeping stored alongside the parameters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub episodes: u64,
    pub total_steps: u64,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub net: Mlp,
    pub adam: AdamState,
    pub meta: CheckpointMeta,
}

impl Checkpoint {
    /// Reject a checkpoint whose network shape does not fit the environment.
    pub fn ensure_compatible(&self, obs_dim: usize, n_actions: usize) -> Result<()> {
        let sizes = self.net.sizes();
        if sizes[0] != obs_dim || *sizes.last().expect("non-empty") != n_actions {
            return Err(Error::Format(format!(
                "checkpoint shape {sizes:?} does not match obs_dim {obs_dim} / {n_actions} actions"
            )));
        }
        Ok(())
    }
}

pub fn save(path: &Path, net: &Mlp, adam: &AdamState, meta: &CheckpointMeta) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let sizes = net.sizes();
    w.write_all(&(sizes.len() as u32).to_le_bytes())?;
    for s in &sizes {
        w.write_all(&(*s as u32).to_le_bytes())?;
    }
    for layer in &net.layers {
        write_matrix(&mut w, &layer.w)?;
        write_vector(&mut w, &layer.b)?;
    }
    w.write_all(&adam.step.to_le_bytes())?;
    for idx in 0..net.layers.len() {
        write_matrix(&mut w, &adam.m_w[idx])?;
        write_vector(&mut w, &adam.m_b[idx])?;
        write_matrix(&mut w, &adam.v_w[idx])?;
        write_vector(&mut w, &adam.v_b[idx])?;
    }
    write!(
        w,
        "seed={}\nepisodes={}\ntotal_steps={}\n",
        meta.seed, meta.episodes, meta.total_steps
    )?;
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| truncated(path))?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("{}: bad magic", path.display())));
    }
    let version = read_u32(&mut r, path)?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported checkpoint version {version}",
            path.display()
        )));
    }
    let n_sizes = read_u32(&mut r, path)? as usize;
    if n_sizes < 2 || n_sizes > 64 {
        return Err(Error::Format(format!(
            "{}: implausible layer count {n_sizes}",
            path.display()
        )));
    }
    let mut sizes = Vec::with_capacity(n_sizes);
    for _ in 0..n_sizes {
        sizes.push(read_u32(&mut r, path)? as usize);
    }
    // shapes come from the header; weights overwrite the placeholder init
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(0);
    use rand::SeedableRng;
    let mut net = Mlp::new(&sizes, &mut rng)?;
    for layer in &mut net.layers {
        layer.w = read_matrix(&mut r, layer.w.dim(), path)?;
        layer.b = read_vector(&mut r, layer.b.len(), path)?;
    }
    let mut adam = AdamState::new(&net);
    adam.step = read_u64(&mut r, path)?;
    for idx in 0..net.layers.len() {
        adam.m_w[idx] = read_matrix(&mut r, adam.m_w[idx].dim(), path)?;
        adam.m_b[idx] = read_vector(&mut r, adam.m_b[idx].len(), path)?;
        adam.v_w[idx] = read_matrix(&mut r, adam.v_w[idx].dim(), path)?;
        adam.v_b[idx] = read_vector(&mut r, adam.v_b[idx].len(), path)?;
    }
    let mut text = String::new();
    r.read_to_string(&mut text)
        .map_err(|_| Error::Format(format!("{}: metadata is not text", path.display())))?;
    let mut meta = CheckpointMeta::default();
    for line in text.lines() {
        let Some((key, value)) = line.split_once('=') else {
            continue;
        };
        match key.trim() {
            "seed" => meta.seed = value.trim().parse().unwrap_or(0),
            "episodes" => meta.episodes = value.trim().parse().unwrap_or(0),
            "total_steps" => meta.total_steps = value.trim().parse().unwrap_or(0),
            _ => {}
        }
    }
    Ok(Checkpoint { net, adam, meta })
}

fn truncated(path: &Path) -> Error {
    Error::Format(format!("{}: truncated checkpoint", path.display()))
}

fn write_matrix(w: &mut impl Write, m: &Array2<f64>) -> Result<()> {
    for v in m.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn write_vector(w: &mut impl Write, v: &Array1<f64>) -> Result<()> {
    for x in v.iter() {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32(r: &mut impl Read, path: &Path) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(|_| truncated(path))?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64(r: &mut impl Read, path: &Path) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf).map_err(|_| truncated(path))?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64(r: &mut impl Read, path: &Path) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf).map_err(|_| truncated(path))?;
    Ok(f64::from_le_bytes(buf))
}

fn read_matrix(r: &mut impl Read, dim: (usize, usize), path: &Path) -> Result<Array2<f64>> {
    let mut m = Array2::zeros(dim);
    for v in m.iter_mut() {
        *v = read_f64(r, path)?;
    }
    Ok(m)
}

fn read_vector(r: &mut impl Read, len: usize, path: &Path) -> Result<Array1<f64>> {
    let mut v = Array1::zeros(len);
    for x in v.iter_mut() {
        *x = read_f64(r, path)?;
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn tmpfile(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("efrl_ckpt_test");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let net = Mlp::new(&[6, 8, 4], &mut rng).unwrap();
        let mut adam = AdamState::new(&net);
        adam.step = 42;
        adam.m_w[0][[0, 0]] = 0.125;
        adam.v_b[1][2] = 3.5;
        let meta = CheckpointMeta {
            seed: 9,
            episodes: 3,
            total_steps: 1234,
        };
        let path = tmpfile("roundtrip.efdq");
        save(&path, &net, &adam, &meta).unwrap();
        let back = load(&path).unwrap();
        assert_eq!(back.net, net);
        assert_eq!(back.adam, adam);
        assert_eq!(back.meta, meta);

        let obs: Vec<f64> = (0..6).map(|i| 0.1 * i as f64).collect();
        assert_eq!(net.forward(&obs).unwrap(), back.net.forward(&obs).unwrap());
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn truncated_file_is_rejected() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let net = Mlp::new(&[4, 4, 2], &mut rng).unwrap();
        let adam = AdamState::new(&net);
        let path = tmpfile("truncated.efdq");
        save(&path, &net, &adam, &CheckpointMeta::default()).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 3]).unwrap();
        assert!(matches!(load(&path), Err(Error::Format(_))));
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn wrong_observation_dim_is_a_shape_error() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let net = Mlp::new(&[8, 4, 50], &mut rng).unwrap();
        let adam = AdamState::new(&net);
        let path = tmpfile("shape.efdq");
        save(&path, &net, &adam, &CheckpointMeta::default()).unwrap();
        let back = load(&path).unwrap();
        assert!(back.ensure_compatible(8, 50).is_ok());
        assert!(back.ensure_compatible(16, 50).is_err());
        assert!(back.ensure_compatible(8, 10).is_err());
        std::fs::remove_file(&path).ok();
    }
}
