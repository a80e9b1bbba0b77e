//! Audio front end: WAV ingestion, spectrograms, energy VAD and sliding
//! windows over speech regions.

mod segment;
mod spectrogram;
mod vad;

use std::io::Cursor;

pub use segment::slide_segments;
pub use spectrogram::{compute_spectrogram, Spectrogram, LOG_FLOOR};
pub use vad::{energy_vad, frame_energies_db};

use crate::{Error, Result, TimeInterval};

/// Mono samples scaled to [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument("non-finite sample".into()));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Samples covering `interval`, rounded to the nearest sample index.
    pub fn slice(&self, interval: &TimeInterval) -> Result<AudioSignal> {
        let dur = self.duration();
        if interval.offset() > dur + crate::TIME_EPS {
            return Err(Error::SegmentOutOfRange {
                onset: interval.onset(),
                offset: interval.offset(),
                duration: dur,
            });
        }
        let sr = self.sample_rate as f64;
        let a = (interval.onset() * sr).round() as usize;
        let b = ((interval.offset() * sr).round() as usize).min(self.samples.len());
        Ok(AudioSignal {
            samples: self.samples[a..b].to_vec(),
            sample_rate: self.sample_rate,
        })
    }
}

/// Decodes a RIFF/WAVE PCM16 mono file. Files at any rate other than
/// `expected_rate` are rejected; there is no internal resampler.
pub fn read_wav(bytes: &[u8], expected_rate: u32) -> Result<AudioSignal> {
    let mut reader = hound::WavReader::new(Cursor::new(bytes))
        .map_err(|e| Error::UnsupportedFormat(e.to_string()))?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::UnsupportedFormat(format!(
            "{:?} {}-bit; only PCM16 is supported",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    if spec.channels != 1 {
        return Err(Error::UnsupportedFormat(format!(
            "{} channels; only mono is supported",
            spec.channels
        )));
    }
    if spec.sample_rate != expected_rate {
        return Err(Error::SampleRate {
            found: spec.sample_rate,
            expected: expected_rate,
        });
    }
    let samples = reader
        .samples::<i16>()
        .map(|s| s.map(|v| v as f64 / 32768.0))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::UnsupportedFormat(e.to_string()))?;
    AudioSignal::new(samples, spec.sample_rate)
}

/// Encodes a signal as PCM16 mono WAV, clipping to the i16 range.
pub fn write_wav(signal: &AudioSignal) -> Result<Vec<u8>> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut buf = Cursor::new(Vec::new());
    {
        let mut w = hound::WavWriter::new(&mut buf, spec)
            .map_err(|e| Error::UnsupportedFormat(e.to_string()))?;
        for &s in &signal.samples {
            let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
            w.write_sample(v)
                .map_err(|e| Error::UnsupportedFormat(e.to_string()))?;
        }
        w.finalize()
            .map_err(|e| Error::UnsupportedFormat(e.to_string()))?;
    }
    Ok(buf.into_inner())
}
