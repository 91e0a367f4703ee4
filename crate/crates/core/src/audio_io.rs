//! Stereo RIFF/WAVE decoding.
//!
//! Accepts PCM 16/24/32-bit integer and IEEE float 32/64-bit data, in both
//! the plain `WAVE_FORMAT_PCM`/`WAVE_FORMAT_IEEE_FLOAT` and the
//! `WAVE_FORMAT_EXTENSIBLE` variants. Only two-channel files are decoded;
//! there is no downmix and no resampling.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

const FORMAT_PCM: u16 = 0x0001;
const FORMAT_IEEE_FLOAT: u16 = 0x0003;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("NotStereo: expected 2 channels, found {0}")]
    NotStereo(u16),
    #[error("UnsupportedEncoding: {0}")]
    UnsupportedEncoding(String),
    #[error("MalformedContainer: {0}")]
    MalformedContainer(String),
    #[error("InvalidBuffer: {0}")]
    InvalidBuffer(String),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

/// Two equal-length channels of samples plus their sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct StereoBuffer {
    left: Vec<f64>,
    right: Vec<f64>,
    sample_rate_hz: u32,
}

impl StereoBuffer {
    pub fn new(left: Vec<f64>, right: Vec<f64>, sample_rate_hz: u32) -> Result<Self, AudioError> {
        if left.len() != right.len() {
            return Err(AudioError::InvalidBuffer(format!(
                "channel lengths differ: left {} right {}",
                left.len(),
                right.len()
            )));
        }
        if sample_rate_hz == 0 {
            return Err(AudioError::InvalidBuffer("sample rate must be positive".into()));
        }
        Ok(Self { left, right, sample_rate_hz })
    }

    pub fn left(&self) -> &[f64] {
        &self.left
    }

    pub fn right(&self) -> &[f64] {
        &self.right
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    /// Drops the first `n` samples of both channels (saturating at empty).
    pub fn skip_samples(&self, n: usize) -> StereoBuffer {
        let n = n.min(self.len());
        StereoBuffer {
            left: self.left[n..].to_vec(),
            right: self.right[n..].to_vec(),
            sample_rate_hz: self.sample_rate_hz,
        }
    }

    /// Same buffer with the channels exchanged.
    pub fn swapped(&self) -> StereoBuffer {
        StereoBuffer { left: self.right.clone(), right: self.left.clone(), sample_rate_hz: self.sample_rate_hz }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SampleEncoding {
    Int16,
    Int24,
    Int32,
    Float32,
    Float64,
}

impl SampleEncoding {
    fn bytes(self) -> usize {
        match self {
            SampleEncoding::Int16 => 2,
            SampleEncoding::Int24 => 3,
            SampleEncoding::Int32 | SampleEncoding::Float32 => 4,
            SampleEncoding::Float64 => 8,
        }
    }

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            SampleEncoding::Int16 => i16::from_le_bytes([b[0], b[1]]) as f64 / 32_768.0,
            SampleEncoding::Int24 => {
                // sign-extend through the top byte of an i32
                let v = i32::from_le_bytes([0, b[0], b[1], b[2]]) >> 8;
                v as f64 / 8_388_608.0
            }
            SampleEncoding::Int32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64 / 2_147_483_648.0,
            SampleEncoding::Float32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            SampleEncoding::Float64 => f64::from_le_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]]),
        }
    }
}

struct FmtChunk {
    channels: u16,
    sample_rate: u32,
    block_align: u16,
    encoding: SampleEncoding,
}

fn le_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn le_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn parse_fmt(body: &[u8]) -> Result<FmtChunk, AudioError> {
    if body.len() < 16 {
        return Err(AudioError::MalformedContainer(format!("fmt chunk is {} bytes, need at least 16", body.len())));
    }
    let mut format_tag = le_u16(body, 0);
    let channels = le_u16(body, 2);
    let sample_rate = le_u32(body, 4);
    let block_align = le_u16(body, 12);
    let bits = le_u16(body, 14);

    if format_tag == FORMAT_EXTENSIBLE {
        // cbSize(2) validBits(2) channelMask(4) subFormat GUID(16)
        if body.len() < 40 {
            return Err(AudioError::MalformedContainer(
                "WAVE_FORMAT_EXTENSIBLE fmt chunk shorter than 40 bytes".into(),
            ));
        }
        format_tag = le_u16(body, 24);
    }

    let encoding = match (format_tag, bits) {
        (FORMAT_PCM, 16) => SampleEncoding::Int16,
        (FORMAT_PCM, 24) => SampleEncoding::Int24,
        (FORMAT_PCM, 32) => SampleEncoding::Int32,
        (FORMAT_IEEE_FLOAT, 32) => SampleEncoding::Float32,
        (FORMAT_IEEE_FLOAT, 64) => SampleEncoding::Float64,
        (tag, bits) => {
            return Err(AudioError::UnsupportedEncoding(format!("format tag {tag:#06x} with {bits} bits per sample")))
        }
    };

    if channels != 2 {
        return Err(AudioError::NotStereo(channels));
    }
    if sample_rate == 0 {
        return Err(AudioError::MalformedContainer("sample rate is zero".into()));
    }
    if block_align as usize != channels as usize * encoding.bytes() {
        return Err(AudioError::MalformedContainer(format!(
            "block align {block_align} inconsistent with {channels} channels of {bits}-bit samples"
        )));
    }
    Ok(FmtChunk { channels, sample_rate, block_align, encoding })
}

/// Decodes an in-memory RIFF/WAVE image.
pub fn decode_wav(bytes: &[u8]) -> Result<StereoBuffer, AudioError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(AudioError::MalformedContainer("missing RIFF/WAVE header".into()));
    }

    let mut fmt: Option<FmtChunk> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = le_u32(bytes, pos + 4) as usize;
        let start = pos + 8;
        let end = start.checked_add(size).filter(|&e| e <= bytes.len()).ok_or_else(|| {
            AudioError::MalformedContainer(format!(
                "chunk {:?} claims {size} bytes past end of file",
                String::from_utf8_lossy(id)
            ))
        })?;
        match id {
            b"fmt " => fmt = Some(parse_fmt(&bytes[start..end])?),
            b"data" => data = Some(&bytes[start..end]),
            _ => {}
        }
        // chunks are word aligned
        pos = end + (size & 1);
    }

    let fmt = fmt.ok_or_else(|| AudioError::MalformedContainer("no fmt chunk".into()))?;
    let data = data.ok_or_else(|| AudioError::MalformedContainer("no data chunk".into()))?;

    let block = fmt.block_align as usize;
    let frames = data.len() / block;
    let width = fmt.encoding.bytes();
    let mut left = Vec::with_capacity(frames);
    let mut right = Vec::with_capacity(frames);
    for frame in data.chunks_exact(block) {
        left.push(fmt.encoding.decode(&frame[..width]));
        right.push(fmt.encoding.decode(&frame[width..2 * width]));
    }
    debug_assert_eq!(fmt.channels, 2);
    StereoBuffer::new(left, right, fmt.sample_rate)
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<StereoBuffer, AudioError> {
    decode_wav(&fs::read(path)?)
}

/// Sample formats supported by the writer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavFormat {
    Pcm16,
    Float32,
    Float64,
}

/// Encodes interleaved channels as a canonical 44-byte-header WAV.
///
/// Any channel count is accepted here so that mono or surround fixtures can
/// be produced; the reader is what enforces stereo.
pub fn encode_wav(channels: &[&[f64]], sample_rate_hz: u32, format: WavFormat) -> Vec<u8> {
    let n_ch = channels.len();
    let frames = channels.first().map_or(0, |c| c.len());
    assert!(channels.iter().all(|c| c.len() == frames), "channels must be equal length");

    let (tag, width) = match format {
        WavFormat::Pcm16 => (FORMAT_PCM, 2usize),
        WavFormat::Float32 => (FORMAT_IEEE_FLOAT, 4),
        WavFormat::Float64 => (FORMAT_IEEE_FLOAT, 8),
    };
    let block = n_ch * width;
    let data_len = frames * block;

    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&tag.to_le_bytes());
    out.extend_from_slice(&(n_ch as u16).to_le_bytes());
    out.extend_from_slice(&sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(sample_rate_hz * block as u32).to_le_bytes());
    out.extend_from_slice(&(block as u16).to_le_bytes());
    out.extend_from_slice(&((width * 8) as u16).to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());

    for i in 0..frames {
        for ch in channels {
            let s = ch[i];
            match format {
                WavFormat::Pcm16 => {
                    let v = (s * 32_768.0).round().clamp(-32_768.0, 32_767.0) as i16;
                    out.extend_from_slice(&v.to_le_bytes());
                }
                WavFormat::Float32 => out.extend_from_slice(&(s as f32).to_le_bytes()),
                WavFormat::Float64 => out.extend_from_slice(&s.to_le_bytes()),
            }
        }
    }
    out
}

pub fn write_wav(path: impl AsRef<Path>, buf: &StereoBuffer, format: WavFormat) -> Result<(), AudioError> {
    let bytes = encode_wav(&[buf.left(), buf.right()], buf.sample_rate_hz(), format);
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}
