//! Reference memory: the taught keyframe sequence and its binary file format.
//!
//! Layout (all little-endian): magic `SVTR`, version u16, vocabulary size u16,
//! keyframe period u16, keyframe count u32; then per keyframe a detection
//! count u16 followed by count records of five f32 values
//! `[class, x_min, y_min, x_max, y_max]`. An 8-object keyframe payload is
//! exactly 5 * 8 * 4 = 160 bytes.

use thiserror::Error;

use crate::descriptor::{BoundingBox, ClassId, SceneDescriptor, SceneObject};

pub const MEMORY_MAGIC: [u8; 4] = *b"SVTR";
pub const MEMORY_VERSION: u16 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum MemoryError {
    #[error("bad magic bytes (not a reference-memory file)")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated payload")]
    Truncated,
    #[error("{0} trailing bytes after last keyframe")]
    TrailingBytes(usize),
    #[error("keyframe {keyframe} object {object}: class value {value} is not an integer in [0, {vocab})")]
    InvalidClass {
        keyframe: usize,
        object: usize,
        value: f32,
        vocab: u16,
    },
    #[error("keyframe {keyframe} object {object}: {source}")]
    InvalidBox {
        keyframe: usize,
        object: usize,
        source: crate::descriptor::DescriptorError,
    },
}

/// Ordered sequence of taught keyframe descriptors plus recording metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceMemory {
    pub keyframes: Vec<SceneDescriptor>,
    /// Size of the class vocabulary the descriptors index into.
    pub vocab_size: u16,
    /// Simulation steps between consecutive keyframes at teach time.
    pub keyframe_period: u16,
}

impl ReferenceMemory {
    pub fn new(keyframes: Vec<SceneDescriptor>, vocab_size: u16, keyframe_period: u16) -> Self {
        Self {
            keyframes,
            vocab_size,
            keyframe_period,
        }
    }

    pub fn len(&self) -> usize {
        self.keyframes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keyframes.is_empty()
    }

    pub fn encode(&self) -> Vec<u8> {
        encode_memory(self)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, MemoryError> {
        decode_memory(bytes)
    }
}

/// Serialize a memory to the binary wire format.
pub fn encode_memory(mem: &ReferenceMemory) -> Vec<u8> {
    let payload: usize = mem.keyframes.iter().map(|k| 2 + 20 * k.len()).sum();
    let mut out = Vec::with_capacity(14 + payload);
    out.extend_from_slice(&MEMORY_MAGIC);
    out.extend_from_slice(&MEMORY_VERSION.to_le_bytes());
    out.extend_from_slice(&mem.vocab_size.to_le_bytes());
    out.extend_from_slice(&mem.keyframe_period.to_le_bytes());
    out.extend_from_slice(&(mem.keyframes.len() as u32).to_le_bytes());
    for frame in &mem.keyframes {
        out.extend_from_slice(&(frame.len() as u16).to_le_bytes());
        for obj in &frame.objects {
            for v in [
                obj.class.0 as f32,
                obj.bbox.x_min as f32,
                obj.bbox.y_min as f32,
                obj.bbox.x_max as f32,
                obj.bbox.y_max as f32,
            ] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], MemoryError> {
        if self.pos + n > self.bytes.len() {
            return Err(MemoryError::Truncated);
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u16(&mut self) -> Result<u16, MemoryError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, MemoryError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32, MemoryError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Parse the binary wire format, validating class range and box invariants.
pub fn decode_memory(bytes: &[u8]) -> Result<ReferenceMemory, MemoryError> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4)? != MEMORY_MAGIC {
        return Err(MemoryError::BadMagic);
    }
    let version = cur.u16()?;
    if version != MEMORY_VERSION {
        return Err(MemoryError::UnsupportedVersion(version));
    }
    let vocab_size = cur.u16()?;
    let keyframe_period = cur.u16()?;
    let count = cur.u32()? as usize;

    let mut keyframes = Vec::with_capacity(count);
    for keyframe in 0..count {
        let n = cur.u16()? as usize;
        let mut objects = Vec::with_capacity(n);
        for object in 0..n {
            let class = cur.f32()?;
            let x_min = cur.f32()?;
            let y_min = cur.f32()?;
            let x_max = cur.f32()?;
            let y_max = cur.f32()?;
            if !(class.fract() == 0.0 && class >= 0.0 && class < vocab_size as f32) {
                return Err(MemoryError::InvalidClass {
                    keyframe,
                    object,
                    value: class,
                    vocab: vocab_size,
                });
            }
            let bbox = BoundingBox::new(x_min as f64, y_min as f64, x_max as f64, y_max as f64)
                .map_err(|source| MemoryError::InvalidBox {
                    keyframe,
                    object,
                    source,
                })?;
            objects.push(SceneObject {
                class: ClassId(class as u16),
                bbox,
            });
        }
        keyframes.push(SceneDescriptor::new(objects));
    }
    if cur.pos != bytes.len() {
        return Err(MemoryError::TrailingBytes(bytes.len() - cur.pos));
    }
    Ok(ReferenceMemory::new(keyframes, vocab_size, keyframe_period))
}
