//! Per-frame embedding storage, the VITG binary format and similarity math.
//!
//! A VITG file is `"VITG"`, then little-endian `u32 version`, `u32 frame_count`,
//! `u32 dim`, `u8 normalized`, seven zero bytes, and `frame_count * dim` `f32`
//! values in frame-major order. Version 2 files carry a patch grid: `u32 rows`
//! and `u32 cols` follow `dim`, and `dim` is `rows * cols * channel`.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, FormatError, Result};

pub const MAGIC: [u8; 4] = *b"VITG";
pub const VERSION_FLAT: u32 = 1;
pub const VERSION_GRID: u32 = 2;

/// Norms at or below this are treated as zero.
pub const MIN_NORM: f64 = 1e-12;
/// Tolerance on unit norm for sets flagged as normalized.
pub const UNIT_NORM_TOL: f64 = 1e-5;

/// Spatial patch layout attached to grid feature sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridShape {
    pub rows: usize,
    pub cols: usize,
}

impl GridShape {
    pub fn patches(&self) -> usize {
        self.rows * self.cols
    }
}

/// Embedding rows for every sampled frame of one video.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFeatureSet {
    video_id: String,
    dim: usize,
    data: Vec<f32>,
    normalized: bool,
    grid: Option<GridShape>,
}

impl FrameFeatureSet {
    /// Builds a set from rows; checks shape and finiteness. The normalized flag
    /// is verified against the actual row norms.
    pub fn from_rows(video_id: impl Into<String>, rows: &[Vec<f32>], normalized: bool) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if let Some((i, _)) = rows.iter().enumerate().find(|(_, r)| r.len() != dim) {
            return Err(Error::Validation(format!("row {i} has {} components, expected {dim}", rows[i].len())));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::from_flat(video_id, dim, data, normalized)
    }

    pub fn from_flat(video_id: impl Into<String>, dim: usize, data: Vec<f32>, normalized: bool) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Validation("feature dim must be >= 1".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::Validation(format!("{} values do not divide into rows of {dim}", data.len())));
        }
        let set = Self { video_id: video_id.into(), dim, data, normalized, grid: None };
        set.check_finite()?;
        if normalized {
            set.check_unit_rows().map_err(Error::Format)?;
        }
        Ok(set)
    }

    /// Grid set: each frame row holds `rows * cols` patch vectors of `channel` reals.
    pub fn from_grid(video_id: impl Into<String>, shape: GridShape, channel: usize, data: Vec<f32>) -> Result<Self> {
        if shape.patches() == 0 || channel == 0 {
            return Err(Error::Validation("grid must have at least one patch and channel".into()));
        }
        let mut set = Self::from_flat(video_id, shape.patches() * channel, data, false)?;
        set.grid = Some(shape);
        Ok(set)
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn set_video_id(&mut self, id: impl Into<String>) {
        self.video_id = id.into();
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frame_count(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn grid(&self) -> Option<GridShape> {
        self.grid
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f32] {
        &self.data
    }

    /// Patch grid of frame `i`, when this is a grid set.
    pub fn grid_feature(&self, i: usize) -> Option<GridFeature> {
        let shape = self.grid?;
        let channel = self.dim / shape.patches();
        Some(GridFeature { shape, channel, patches: self.row(i).to_vec() })
    }

    /// Collapses a grid set to one anchor vector per frame; flat sets are returned as is.
    pub fn anchor_pooled(&self) -> Result<FrameFeatureSet> {
        let Some(shape) = self.grid else {
            return Ok(self.clone());
        };
        let channel = self.dim / shape.patches();
        let mut data = Vec::with_capacity(self.frame_count() * channel);
        for i in 0..self.frame_count() {
            let grid = GridFeature { shape, channel, patches: self.row(i).to_vec() };
            data.extend(anchor_pool(&grid)?);
        }
        FrameFeatureSet::from_flat(self.video_id.clone(), channel, data, false)
    }

    fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(p) => Err(FormatError::NonFinite { frame: p / self.dim, component: p % self.dim }.into()),
            None => Ok(()),
        }
    }

    fn check_unit_rows(&self) -> Result<(), FormatError> {
        for (i, row) in self.rows().enumerate() {
            if (norm(row) - 1.0).abs() > UNIT_NORM_TOL {
                return Err(FormatError::NotNormalized(i));
            }
        }
        Ok(())
    }
}

/// Patch features of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFeature {
    pub shape: GridShape,
    pub channel: usize,
    /// `rows * cols` patch vectors of `channel` components, row-major over the grid.
    pub patches: Vec<f32>,
}

impl GridFeature {
    pub fn new(rows: usize, cols: usize, channel: usize, patches: Vec<f32>) -> Result<Self> {
        let grid = Self { shape: GridShape { rows, cols }, channel, patches };
        grid.validate()?;
        Ok(grid)
    }

    fn validate(&self) -> Result<()> {
        let m = self.shape.patches();
        if m == 0 || self.channel == 0 {
            return Err(Error::Validation("empty grid".into()));
        }
        if self.patches.len() != m * self.channel {
            return Err(Error::Validation(format!(
                "grid {}x{} with {} channels needs {} values, got {}",
                self.shape.rows,
                self.shape.cols,
                self.channel,
                m * self.channel,
                self.patches.len()
            )));
        }
        if self.patches.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("grid contains non-finite values".into()));
        }
        Ok(())
    }
}

/// Anchor vector of a frame: the mean of its `M` patch vectors.
pub fn anchor_pool(grid: &GridFeature) -> Result<Vec<f32>> {
    grid.validate()?;
    let m = grid.shape.patches();
    let mut acc = vec![0f64; grid.channel];
    for patch in grid.patches.chunks_exact(grid.channel) {
        for (a, &v) in acc.iter_mut().zip(patch) {
            *a += v as f64;
        }
    }
    Ok(acc.into_iter().map(|a| (a / m as f64) as f32).collect())
}

fn dot(u: &[f32], v: &[f32]) -> f64 {
    u.iter().zip(v).map(|(&a, &b)| a as f64 * b as f64).sum()
}

fn norm(u: &[f32]) -> f64 {
    dot(u, u).sqrt()
}

/// Cosine similarity accumulated in f64 and clamped to `[-1, 1]`.
pub fn cosine_sim(u: &[f32], v: &[f32]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::MathDomain(format!("dimension mismatch: {} vs {}", u.len(), v.len())));
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu <= MIN_NORM || nv <= MIN_NORM {
        return Err(Error::MathDomain("cosine similarity of a near-zero vector".into()));
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Rescales every row to unit length.
pub fn normalize(set: &FrameFeatureSet) -> Result<FrameFeatureSet> {
    let mut data = Vec::with_capacity(set.data.len());
    for (i, row) in set.rows().enumerate() {
        let n = norm(row);
        if n <= MIN_NORM {
            return Err(Error::MathDomain(format!("row {i} has zero norm")));
        }
        data.extend(row.iter().map(|&v| (v as f64 / n) as f32));
    }
    Ok(FrameFeatureSet { video_id: set.video_id.clone(), dim: set.dim, data, normalized: true, grid: set.grid })
}

const HEADER_LEN: usize = 4 + 4 + 4 + 4 + 1 + 7;
const GRID_EXTRA: usize = 8;

pub fn encode_features(set: &FrameFeatureSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + GRID_EXTRA + set.data.len() * 4);
    out.extend_from_slice(&MAGIC);
    let version = if set.grid.is_some() { VERSION_GRID } else { VERSION_FLAT };
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&(set.frame_count() as u32).to_le_bytes());
    out.extend_from_slice(&(set.dim as u32).to_le_bytes());
    if let Some(g) = set.grid {
        out.extend_from_slice(&(g.rows as u32).to_le_bytes());
        out.extend_from_slice(&(g.cols as u32).to_le_bytes());
    }
    out.push(set.normalized as u8);
    out.extend_from_slice(&[0u8; 7]);
    for v in &set.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Decodes a VITG buffer. `video_id` is not stored in the file.
pub fn decode_features(video_id: impl Into<String>, bytes: &[u8]) -> Result<FrameFeatureSet> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    let magic: [u8; 4] = cur.take(4)?.try_into().unwrap();
    if magic != MAGIC {
        return Err(FormatError::BadMagic(magic).into());
    }
    let version = cur.u32()?;
    if version != VERSION_FLAT && version != VERSION_GRID {
        return Err(FormatError::UnsupportedVersion(version).into());
    }
    let n = cur.u32()? as usize;
    let dim = cur.u32()? as usize;
    let grid = if version == VERSION_GRID {
        let rows = cur.u32()? as usize;
        let cols = cur.u32()? as usize;
        let shape = GridShape { rows, cols };
        if shape.patches() == 0 || !dim.is_multiple_of(shape.patches()) {
            return Err(FormatError::Header(format!("dim {dim} is not a multiple of grid {rows}x{cols}")).into());
        }
        Some(shape)
    } else {
        None
    };
    let flag = cur.take(1)?[0];
    if flag > 1 {
        return Err(FormatError::Header(format!("normalized flag must be 0 or 1, got {flag}")).into());
    }
    if cur.take(7)?.iter().any(|&b| b != 0) {
        return Err(FormatError::ReservedBytes.into());
    }
    if dim == 0 {
        return Err(FormatError::Header("dim must be >= 1".into()).into());
    }
    let payload_len = n
        .checked_mul(dim)
        .and_then(|c| c.checked_mul(4))
        .ok_or_else(|| FormatError::Header("frame_count * dim overflows".into()))?;
    let remaining = bytes.len() - cur.pos;
    if remaining < payload_len {
        return Err(FormatError::Truncated { expected: payload_len, actual: remaining }.into());
    }
    if remaining > payload_len {
        return Err(FormatError::TrailingBytes(remaining - payload_len).into());
    }
    let data: Vec<f32> =
        cur.buf[cur.pos..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    if let Some(p) = data.iter().position(|v| !v.is_finite()) {
        return Err(FormatError::NonFinite { frame: p / dim, component: p % dim }.into());
    }
    let set = FrameFeatureSet { video_id: video_id.into(), dim, data, normalized: flag == 1, grid };
    if set.normalized {
        set.check_unit_rows()?;
    }
    Ok(set)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        if self.buf.len() - self.pos < n {
            return Err(FormatError::Truncated { expected: self.pos + n, actual: self.buf.len() });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Loads a VITG file; the video id defaults to the file stem.
pub fn load_features(path: impl AsRef<Path>) -> Result<FrameFeatureSet> {
    let path = path.as_ref();
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_features(id, &bytes)
}

pub fn save_features(set: &FrameFeatureSet, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode_features(set))?;
    f.flush()?;
    Ok(())
}
