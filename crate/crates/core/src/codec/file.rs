//! `DTS1` binary stream files and the `+3 +0 OV -2` text debug format.
//!
//! Binary layout, all integers little-endian:
//!
//! ```text
//! "DTS1" | u8 width_bits | u32 channel_count | { u32 word_count | u16 word * word_count } * channel_count
//! ```
//!
//! Only the low `width_bits` of each `u16` are significant. A file may hold
//! several blocks back to back; [`read_dts_blocks`] reads them all.

use std::io::{ErrorKind, Read, Write};

use super::{CodecError, DeltaStream, DeltaWord, WordWidth};

const MAGIC: &[u8; 4] = b"DTS1";

pub fn write_dts<W: Write>(mut out: W, channels: &[DeltaStream]) -> Result<(), CodecError> {
    let width = match channels.first() {
        Some(first) => first.width(),
        None => return Err(CodecError::EmptySignal),
    };
    if let Some(other) = channels.iter().find(|c| c.width() != width) {
        return Err(CodecError::WidthMismatch(width.bits(), other.width().bits()));
    }
    out.write_all(MAGIC)?;
    out.write_all(&[width.bits() as u8])?;
    out.write_all(&(channels.len() as u32).to_le_bytes())?;
    for channel in channels {
        out.write_all(&(channel.len() as u32).to_le_bytes())?;
        for raw in channel.raw_words() {
            out.write_all(&(raw as u16).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_dts<R: Read>(mut input: R) -> Result<Vec<DeltaStream>, CodecError> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    read_block_body(&mut input, magic)
}

/// Reads consecutive `DTS1` blocks until end of input.
pub fn read_dts_blocks<R: Read>(mut input: R) -> Result<Vec<Vec<DeltaStream>>, CodecError> {
    let mut blocks = Vec::new();
    loop {
        let mut magic = [0u8; 4];
        match read_exact_or_eof(&mut input, &mut magic)? {
            false => return Ok(blocks),
            true => blocks.push(read_block_body(&mut input, magic)?),
        }
    }
}

fn read_exact_or_eof<R: Read>(input: &mut R, buf: &mut [u8]) -> Result<bool, CodecError> {
    let mut filled = 0;
    while filled < buf.len() {
        match input.read(&mut buf[filled..]) {
            Ok(0) if filled == 0 => return Ok(false),
            Ok(0) => return Err(CodecError::Truncated),
            Ok(n) => filled += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(true)
}

fn read_block_body<R: Read>(input: &mut R, magic: [u8; 4]) -> Result<Vec<DeltaStream>, CodecError> {
    if &magic != MAGIC {
        return Err(CodecError::BadMagic);
    }
    let mut byte = [0u8; 1];
    input.read_exact(&mut byte)?;
    let width = WordWidth::new(u32::from(byte[0]))?;
    let channel_count = read_u32(input)?;
    let mut channels = Vec::with_capacity(channel_count.min(1 << 16) as usize);
    for _ in 0..channel_count {
        let word_count = read_u32(input)? as usize;
        let mut bytes = vec![0u8; word_count * 2];
        input.read_exact(&mut bytes)?;
        let raw: Vec<u32> = bytes
            .chunks_exact(2)
            .map(|c| u32::from(u16::from_le_bytes([c[0], c[1]])))
            .collect();
        channels.push(DeltaStream::from_raw(width, &raw)?);
    }
    Ok(channels)
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32, CodecError> {
    let mut buf = [0u8; 4];
    input.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

/// One channel per line, words separated by single spaces.
pub fn format_text(channels: &[DeltaStream]) -> String {
    let mut out = String::new();
    for channel in channels {
        let line: Vec<String> = channel.words().iter().map(|w| w.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_text(text: &str, width: WordWidth) -> Result<Vec<DeltaStream>, CodecError> {
    text.lines()
        .map(|line| {
            let words = line
                .split_whitespace()
                .map(parse_token)
                .collect::<Result<Vec<_>, _>>()?;
            DeltaStream::new(width, words)
        })
        .collect()
}

fn parse_token(token: &str) -> Result<DeltaWord, CodecError> {
    if token == "OV" {
        return Ok(DeltaWord::Overflow);
    }
    let bad = || CodecError::BadToken(token.to_string());
    let (negative, digits) = match token.as_bytes().first() {
        Some(b'+') => (false, &token[1..]),
        Some(b'-') => (true, &token[1..]),
        _ => return Err(bad()),
    };
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let magnitude = digits.parse::<u32>().map_err(|_| bad())?;
    Ok(DeltaWord::Data { negative, magnitude })
}
