//! Spectrogram data model and the PPF1 frame-stream format.
//!
//! PPF1 layout, all little-endian:
//!
//! ```text
//! magic "PPF1" (4) | version u16 = 1 | pol u8 (0 = LHCP, 1 = RHCP) | pad u8
//! n_chan u32 | f0_hz f64 | df_hz f64 | frame_period_s f64 | start_mjd f64
//! then per frame: frame_index u64 | n_chan x f32 power
//! ```

use std::fmt;
use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"PPF1";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 44;

const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic {0:?}, expected \"PPF1\"")]
    BadMagic([u8; 4]),
    #[error("unsupported PPF1 version {0}")]
    Version(u16),
    #[error("unknown polarization code {0}")]
    Polarization(u8),
    #[error("truncated header")]
    TruncatedHeader,
    #[error("truncated frame at stream position {position}")]
    TruncatedFrame { position: u64 },
    #[error("frame {frame_index}: expected {expected} channels, got {got}")]
    FrameLength {
        frame_index: u64,
        expected: usize,
        got: usize,
    },
    #[error("frame {frame_index} is not after frame {previous}")]
    FrameOrder { frame_index: u64, previous: u64 },
    #[error("frame {frame_index}: power at channel {chan} is {value}")]
    BadPower {
        frame_index: u64,
        chan: usize,
        value: f32,
    },
    #[error("frame {frame_index} breaks contiguity (expected {expected})")]
    Gap { frame_index: u64, expected: u64 },
    #[error("invalid header: {0}")]
    Header(String),
    #[error("channel index {index} out of range (n_chan = {n_chan})")]
    ChannelRange { index: usize, n_chan: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Circular polarization of a frame stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolChannel {
    #[serde(rename = "LHCP")]
    Lhcp,
    #[serde(rename = "RHCP")]
    Rhcp,
}

impl PolChannel {
    pub const BOTH: [PolChannel; 2] = [PolChannel::Lhcp, PolChannel::Rhcp];

    pub fn code(self) -> u8 {
        match self {
            PolChannel::Lhcp => 0,
            PolChannel::Rhcp => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self, FormatError> {
        match code {
            0 => Ok(PolChannel::Lhcp),
            1 => Ok(PolChannel::Rhcp),
            other => Err(FormatError::Polarization(other)),
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            PolChannel::Lhcp => PolChannel::Rhcp,
            PolChannel::Rhcp => PolChannel::Lhcp,
        }
    }

    pub fn index(self) -> usize {
        self.code() as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PolChannel::Lhcp => "LHCP",
            PolChannel::Rhcp => "RHCP",
        }
    }
}

impl fmt::Display for PolChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PolChannel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "LHCP" => Ok(PolChannel::Lhcp),
            "RHCP" => Ok(PolChannel::Rhcp),
            other => Err(format!("unknown polarization {other:?}")),
        }
    }
}

/// Describes one polarization's frame stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameHeader {
    /// Center frequency of channel 0.
    pub f0_hz: f64,
    /// Channel width.
    pub df_hz: f64,
    pub n_chan: u32,
    pub frame_period_s: f64,
    pub pol: PolChannel,
    /// Timestamp of frame index 0.
    pub start_mjd: f64,
}

impl FrameHeader {
    pub const DEFAULT_DF_HZ: f64 = 3.725;
    pub const DEFAULT_FRAME_PERIOD_S: f64 = 0.25;

    pub fn validate(&self) -> Result<(), FormatError> {
        let bad = |msg: String| Err(FormatError::Header(msg));
        if !(self.df_hz.is_finite() && self.df_hz > 0.0) {
            return bad(format!("df_hz {} must be > 0", self.df_hz));
        }
        if !(self.frame_period_s.is_finite() && self.frame_period_s > 0.0) {
            return bad(format!("frame_period_s {} must be > 0", self.frame_period_s));
        }
        if self.n_chan == 0 {
            return bad("n_chan must be >= 1".into());
        }
        if !self.f0_hz.is_finite() {
            return bad(format!("f0_hz {} must be finite", self.f0_hz));
        }
        if !(self.start_mjd.is_finite() && self.start_mjd > 0.0) {
            return bad(format!("start_mjd {} must be finite and positive", self.start_mjd));
        }
        Ok(())
    }

    pub fn n_chan(&self) -> usize {
        self.n_chan as usize
    }

    /// Center frequency of channel `i`.
    pub fn channel_freq(&self, i: usize) -> Result<f64, FormatError> {
        if i >= self.n_chan() {
            return Err(FormatError::ChannelRange {
                index: i,
                n_chan: self.n_chan(),
            });
        }
        Ok(self.f0_hz + i as f64 * self.df_hz)
    }

    /// Nearest channel to `freq_hz`, or `None` outside the band.
    pub fn nearest_channel(&self, freq_hz: f64) -> Option<usize> {
        let c = ((freq_hz - self.f0_hz) / self.df_hz).round();
        (c >= 0.0 && c < self.n_chan as f64).then_some(c as usize)
    }

    pub fn frame_mjd(&self, frame_index: u64) -> f64 {
        self.start_mjd + frame_index as f64 * self.frame_period_s / SECONDS_PER_DAY
    }

    /// Nearest frame index to `mjd` (may be negative).
    pub fn nearest_frame(&self, mjd: f64) -> i64 {
        ((mjd - self.start_mjd) * SECONDS_PER_DAY / self.frame_period_s).round() as i64
    }

    /// True when two headers describe the same time/frequency grid.
    pub fn same_grid(&self, other: &FrameHeader) -> bool {
        self.f0_hz == other.f0_hz
            && self.df_hz == other.df_hz
            && self.n_chan == other.n_chan
            && self.frame_period_s == other.frame_period_s
            && self.start_mjd == other.start_mjd
    }

    pub fn with_pol(mut self, pol: PolChannel) -> Self {
        self.pol = pol;
        self
    }

    fn encode(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[0..4].copy_from_slice(&MAGIC);
        out[4..6].copy_from_slice(&VERSION.to_le_bytes());
        out[6] = self.pol.code();
        out[7] = 0;
        out[8..12].copy_from_slice(&self.n_chan.to_le_bytes());
        out[12..20].copy_from_slice(&self.f0_hz.to_le_bytes());
        out[20..28].copy_from_slice(&self.df_hz.to_le_bytes());
        out[28..36].copy_from_slice(&self.frame_period_s.to_le_bytes());
        out[36..44].copy_from_slice(&self.start_mjd.to_le_bytes());
        out
    }

    fn decode(bytes: &[u8; HEADER_LEN]) -> Result<Self, FormatError> {
        let mut magic = [0u8; 4];
        magic.copy_from_slice(&bytes[0..4]);
        if magic != MAGIC {
            return Err(FormatError::BadMagic(magic));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(FormatError::Version(version));
        }
        let pol = PolChannel::from_code(bytes[6])?;
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let header = FrameHeader {
            pol,
            n_chan: u32::from_le_bytes(bytes[8..12].try_into().unwrap()),
            f0_hz: f64_at(12),
            df_hz: f64_at(20),
            frame_period_s: f64_at(28),
            start_mjd: f64_at(36),
        };
        header.validate()?;
        Ok(header)
    }
}

/// One polarization's power spectrum at one frame index.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFrame {
    pub frame_index: u64,
    pub powers: Vec<f32>,
}

impl SpectralFrame {
    pub fn timestamp_mjd(&self, header: &FrameHeader) -> f64 {
        header.frame_mjd(self.frame_index)
    }
}

/// Incremental PPF1 writer.
pub struct FrameWriter<W: Write> {
    sink: W,
    header: FrameHeader,
    bytes: u64,
    last_index: Option<u64>,
}

impl<W: Write> FrameWriter<W> {
    pub fn new(header: FrameHeader, mut sink: W) -> Result<Self, FormatError> {
        header.validate()?;
        let encoded = header.encode();
        sink.write_all(&encoded)?;
        Ok(Self {
            sink,
            header,
            bytes: HEADER_LEN as u64,
            last_index: None,
        })
    }

    pub fn write_frame(&mut self, frame: &SpectralFrame) -> Result<(), FormatError> {
        self.write_row(frame.frame_index, &frame.powers)
    }

    pub fn write_row(&mut self, frame_index: u64, powers: &[f32]) -> Result<(), FormatError> {
        if powers.len() != self.header.n_chan() {
            return Err(FormatError::FrameLength {
                frame_index,
                expected: self.header.n_chan(),
                got: powers.len(),
            });
        }
        if let Some(previous) = self.last_index {
            if frame_index <= previous {
                return Err(FormatError::FrameOrder {
                    frame_index,
                    previous,
                });
            }
        }
        if let Some((chan, &value)) = powers
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p >= 0.0))
        {
            return Err(FormatError::BadPower {
                frame_index,
                chan,
                value,
            });
        }
        let mut buf = Vec::with_capacity(8 + 4 * powers.len());
        buf.extend_from_slice(&frame_index.to_le_bytes());
        for p in powers {
            buf.extend_from_slice(&p.to_le_bytes());
        }
        self.sink.write_all(&buf)?;
        self.bytes += buf.len() as u64;
        self.last_index = Some(frame_index);
        Ok(())
    }

    /// Flushes the sink and returns the total number of bytes written.
    pub fn finish(mut self) -> Result<u64, FormatError> {
        self.sink.flush()?;
        Ok(self.bytes)
    }
}

/// Writes a complete PPF1 stream and returns its length in bytes.
pub fn write_frames<'a, W, I>(header: &FrameHeader, frames: I, sink: W) -> Result<u64, FormatError>
where
    W: Write,
    I: IntoIterator<Item = &'a SpectralFrame>,
{
    let mut writer = FrameWriter::new(*header, sink)?;
    for frame in frames {
        writer.write_frame(frame)?;
    }
    writer.finish()
}

/// Streaming PPF1 reader. Holds one frame's worth of bytes at a time.
pub struct FrameReader<R: Read> {
    source: R,
    header: FrameHeader,
    buf: Vec<u8>,
    position: u64,
    last_index: Option<u64>,
    done: bool,
}

/// Reads the header and returns a lazy iterator over the frames.
pub fn read_frames<R: Read>(mut source: R) -> Result<FrameReader<R>, FormatError> {
    let mut raw = [0u8; HEADER_LEN];
    let got = read_full(&mut source, &mut raw)?;
    if got < 4 {
        return Err(FormatError::TruncatedHeader);
    }
    if raw[0..4] != MAGIC {
        return Err(FormatError::BadMagic(raw[0..4].try_into().unwrap()));
    }
    if got < HEADER_LEN {
        return Err(FormatError::TruncatedHeader);
    }
    let header = FrameHeader::decode(&raw)?;
    let frame_len = 8 + 4 * header.n_chan();
    Ok(FrameReader {
        source,
        header,
        buf: vec![0u8; frame_len],
        position: HEADER_LEN as u64,
        last_index: None,
        done: false,
    })
}

impl<R: Read> FrameReader<R> {
    pub fn header(&self) -> &FrameHeader {
        &self.header
    }

    fn next_frame(&mut self) -> Result<Option<SpectralFrame>, FormatError> {
        let got = read_full(&mut self.source, &mut self.buf)?;
        if got == 0 {
            return Ok(None);
        }
        if got < self.buf.len() {
            return Err(FormatError::TruncatedFrame {
                position: self.position,
            });
        }
        self.position += got as u64;
        let frame_index = u64::from_le_bytes(self.buf[0..8].try_into().unwrap());
        if let Some(previous) = self.last_index {
            if frame_index <= previous {
                return Err(FormatError::FrameOrder {
                    frame_index,
                    previous,
                });
            }
        }
        self.last_index = Some(frame_index);
        let powers = self.buf[8..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Some(SpectralFrame {
            frame_index,
            powers,
        }))
    }
}

impl<R: Read> Iterator for FrameReader<R> {
    type Item = Result<SpectralFrame, FormatError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_frame() {
            Ok(Some(frame)) => Some(Ok(frame)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

fn read_full<R: Read>(source: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match source.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

/// A dense, contiguous block of frames for one polarization.
///
/// Row `i` holds frame index `first_frame + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub header: FrameHeader,
    pub first_frame: u64,
    pub data: Vec<f32>,
}

impl Spectrogram {
    pub fn zeros(header: FrameHeader, n_frames: usize) -> Self {
        Self {
            header,
            first_frame: 0,
            data: vec![0.0; n_frames * header.n_chan()],
        }
    }

    pub fn n_chan(&self) -> usize {
        self.header.n_chan()
    }

    pub fn n_frames(&self) -> usize {
        self.data.len() / self.n_chan()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        let n = self.n_chan();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        let n = self.n_chan();
        &mut self.data[i * n..(i + 1) * n]
    }

    pub fn get(&self, row: usize, chan: usize) -> f32 {
        self.data[row * self.n_chan() + chan]
    }

    pub fn frames(&self) -> impl Iterator<Item = SpectralFrame> + '_ {
        (0..self.n_frames()).map(move |i| SpectralFrame {
            frame_index: self.first_frame + i as u64,
            powers: self.row(i).to_vec(),
        })
    }

    /// Collects frames into a dense block; indices must be contiguous.
    pub fn from_frames<I>(header: FrameHeader, frames: I) -> Result<Self, FormatError>
    where
        I: IntoIterator<Item = Result<SpectralFrame, FormatError>>,
    {
        let n = header.n_chan();
        let mut data = Vec::new();
        let mut first = None;
        let mut expected = 0u64;
        for frame in frames {
            let frame = frame?;
            if frame.powers.len() != n {
                return Err(FormatError::FrameLength {
                    frame_index: frame.frame_index,
                    expected: n,
                    got: frame.powers.len(),
                });
            }
            match first {
                None => first = Some(frame.frame_index),
                Some(_) if frame.frame_index != expected => {
                    return Err(FormatError::Gap {
                        frame_index: frame.frame_index,
                        expected,
                    })
                }
                Some(_) => {}
            }
            expected = frame.frame_index + 1;
            data.extend_from_slice(&frame.powers);
        }
        Ok(Self {
            header,
            first_frame: first.unwrap_or(0),
            data,
        })
    }

    pub fn read<R: Read>(source: R) -> Result<Self, FormatError> {
        let reader = read_frames(source)?;
        let header = *reader.header();
        Self::from_frames(header, reader)
    }

    pub fn write<W: Write>(&self, sink: W) -> Result<u64, FormatError> {
        let mut writer = FrameWriter::new(self.header, sink)?;
        for i in 0..self.n_frames() {
            writer.write_row(self.first_frame + i as u64, self.row(i))?;
        }
        writer.finish()
    }
}
