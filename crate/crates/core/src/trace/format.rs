use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::{TraceHeader, TraceOp, TraceRecord, TRACE_VERSION};
use crate::cache::Line;
use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 8] = b"HYTRACEB";

fn malformed(line: u64, reason: impl Into<String>) -> Error {
    Error::MalformedLine { line, reason: reason.into() }
}

fn parse_header_line(s: &str) -> Result<TraceHeader> {
    let bad = || Error::BadHeader(format!("expected `HYTRACE v1 cores=<n> data=<0|1>`, found `{s}`"));
    let mut it = s.split_whitespace();
    if it.next() != Some("HYTRACE") {
        return Err(bad());
    }
    let version = it.next().and_then(|v| v.strip_prefix('v')).and_then(|v| v.parse().ok()).ok_or_else(bad)?;
    if version != TRACE_VERSION {
        return Err(Error::BadHeader(format!("unsupported trace version {version}")));
    }
    let cores: u32 = it
        .next()
        .and_then(|v| v.strip_prefix("cores="))
        .and_then(|v| v.parse().ok())
        .ok_or_else(bad)?;
    let data_bearing = match it.next().and_then(|v| v.strip_prefix("data=")) {
        Some("0") => false,
        Some("1") => true,
        _ => return Err(bad()),
    };
    if it.next().is_some() {
        return Err(bad());
    }
    if cores == 0 {
        return Err(Error::BadHeader("cores must be at least 1".into()));
    }
    Ok(TraceHeader { version, cores, data_bearing, description: String::new() })
}

fn parse_payload(s: &str) -> Option<Line> {
    if s.len() != 128 || !s.bytes().all(|b| b.is_ascii_hexdigit()) {
        return None;
    }
    let mut line = [0u64; 8];
    for (i, w) in line.iter_mut().enumerate() {
        *w = u64::from_str_radix(&s[i * 16..(i + 1) * 16], 16).ok()?;
    }
    Some(line)
}

fn parse_record(s: &str, line_no: u64, header: &TraceHeader) -> Result<TraceRecord> {
    let fields: Vec<&str> = s.split_whitespace().collect();
    let expected = if header.data_bearing { 5 } else { 4 };
    if fields.len() != expected {
        return Err(malformed(
            line_no,
            format!("expected {expected} fields, found {}", fields.len()),
        ));
    }
    let core: u32 = fields[0].parse().map_err(|_| malformed(line_no, "bad core id"))?;
    if core >= header.cores {
        return Err(malformed(line_no, format!("core {core} outside cores={}", header.cores)));
    }
    let gap_cycles: u64 = fields[1].parse().map_err(|_| malformed(line_no, "bad gap"))?;
    let op = match fields[2] {
        "R" => TraceOp::Read,
        "W" => TraceOp::Write,
        "I" => TraceOp::Ifetch,
        other => return Err(malformed(line_no, format!("bad op `{other}`"))),
    };
    let addr = fields[3]
        .strip_prefix("0x")
        .or_else(|| fields[3].strip_prefix("0X"))
        .and_then(|h| u64::from_str_radix(h, 16).ok())
        .ok_or_else(|| malformed(line_no, "address must be 0x-prefixed hex"))?;
    let payload = if header.data_bearing {
        Some(parse_payload(fields[4]).ok_or_else(|| malformed(line_no, "payload must be 128 hex digits"))?)
    } else {
        None
    };
    Ok(TraceRecord { core, gap_cycles, op, addr, payload })
}

/// Streaming reader for the text format.
pub struct TextReader<R> {
    input: R,
    header: TraceHeader,
    line_no: u64,
    pending: Option<(u64, String)>,
    buf: String,
    failed: bool,
}

impl<R: BufRead> TextReader<R> {
    pub fn new(mut input: R) -> Result<TextReader<R>> {
        let mut buf = String::new();
        if input.read_line(&mut buf)? == 0 {
            return Err(Error::BadHeader("empty trace".into()));
        }
        let mut header = parse_header_line(buf.trim_end())?;
        let mut line_no = 1;
        let mut description = Vec::new();
        let mut pending = None;
        loop {
            buf.clear();
            if input.read_line(&mut buf)? == 0 {
                break;
            }
            line_no += 1;
            let t = buf.trim();
            if let Some(c) = t.strip_prefix('#') {
                description.push(c.strip_prefix(' ').unwrap_or(c).to_string());
            } else if !t.is_empty() {
                pending = Some((line_no, t.to_string()));
                break;
            }
        }
        header.description = description.join("\n");
        Ok(TextReader { input, header, line_no, pending, buf, failed: false })
    }

    pub fn header(&self) -> &TraceHeader {
        &self.header
    }

    fn next_line(&mut self) -> Result<Option<(u64, String)>> {
        if let Some(p) = self.pending.take() {
            return Ok(Some(p));
        }
        loop {
            self.buf.clear();
            if self.input.read_line(&mut self.buf)? == 0 {
                return Ok(None);
            }
            self.line_no += 1;
            let t = self.buf.trim();
            if !t.is_empty() && !t.starts_with('#') {
                return Ok(Some((self.line_no, t.to_string())));
            }
        }
    }
}

impl<R: BufRead> Iterator for TextReader<R> {
    type Item = Result<TraceRecord>;

    fn next(&mut self) -> Option<Result<TraceRecord>> {
        if self.failed {
            return None;
        }
        let r = match self.next_line() {
            Ok(Some((n, l))) => parse_record(&l, n, &self.header),
            Ok(None) => return None,
            Err(e) => Err(e),
        };
        self.failed = r.is_err();
        Some(r)
    }
}

/// Streaming reader for the binary format.
pub struct BinaryReader<R> {
    input: R,
    header: TraceHeader,
    index: u64,
    failed: bool,
}

fn read_exact_or_eof<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<bool> {
    let mut got = 0;
    while got < buf.len() {
        let n = r.read(&mut buf[got..])?;
        if n == 0 {
            if got == 0 {
                return Ok(false);
            }
            return Err(Error::Io(std::io::ErrorKind::UnexpectedEof.into()));
        }
        got += n;
    }
    Ok(true)
}

impl<R: Read> BinaryReader<R> {
    pub fn new(mut input: R) -> Result<BinaryReader<R>> {
        let mut fixed = [0u8; 8 + 4 + 4 + 1 + 4];
        input
            .read_exact(&mut fixed)
            .map_err(|_| Error::BadHeader("truncated binary header".into()))?;
        if &fixed[..8] != BINARY_MAGIC {
            return Err(Error::BadHeader("missing HYTRACEB magic".into()));
        }
        let version = u32::from_le_bytes(fixed[8..12].try_into().unwrap());
        let cores = u32::from_le_bytes(fixed[12..16].try_into().unwrap());
        let data = fixed[16];
        let desc_len = u32::from_le_bytes(fixed[17..21].try_into().unwrap()) as usize;
        if version != TRACE_VERSION {
            return Err(Error::BadHeader(format!("unsupported trace version {version}")));
        }
        if cores == 0 || data > 1 {
            return Err(Error::BadHeader("invalid cores or data flag".into()));
        }
        let mut desc = vec![0u8; desc_len];
        input
            .read_exact(&mut desc)
            .map_err(|_| Error::BadHeader("truncated description".into()))?;
        let description = String::from_utf8(desc).map_err(|_| Error::BadHeader("description is not UTF-8".into()))?;
        Ok(BinaryReader {
            input,
            header: TraceHeader { version, cores, data_bearing: data == 1, description },
            index: 0,
            failed: false,
        })
    }

    pub fn header(&self) -> &TraceHeader {
        &self.header
    }

    fn read_record(&mut self) -> Result<Option<TraceRecord>> {
        let mut len = [0u8; 2];
        if !read_exact_or_eof(&mut self.input, &mut len)? {
            return Ok(None);
        }
        self.index += 1;
        let n = self.index;
        let len = u16::from_le_bytes(len) as usize;
        let expected = if self.header.data_bearing { 85 } else { 21 };
        if len != expected {
            return Err(malformed(n, format!("record length {len}, expected {expected}")));
        }
        let mut body = vec![0u8; len];
        self.input.read_exact(&mut body).map_err(|_| malformed(n, "truncated record"))?;
        let core = u32::from_le_bytes(body[0..4].try_into().unwrap());
        if core >= self.header.cores {
            return Err(malformed(n, format!("core {core} outside cores={}", self.header.cores)));
        }
        let gap_cycles = u64::from_le_bytes(body[4..12].try_into().unwrap());
        let op = match body[12] {
            0 => TraceOp::Read,
            1 => TraceOp::Write,
            2 => TraceOp::Ifetch,
            o => return Err(malformed(n, format!("bad op code {o}"))),
        };
        let addr = u64::from_le_bytes(body[13..21].try_into().unwrap());
        let payload = self.header.data_bearing.then(|| {
            let mut line = [0u64; 8];
            for (i, w) in line.iter_mut().enumerate() {
                *w = u64::from_be_bytes(body[21 + i * 8..29 + i * 8].try_into().unwrap());
            }
            line
        });
        Ok(Some(TraceRecord { core, gap_cycles, op, addr, payload }))
    }
}

impl<R: Read> Iterator for BinaryReader<R> {
    type Item = Result<TraceRecord>;

    fn next(&mut self) -> Option<Result<TraceRecord>> {
        if self.failed {
            return None;
        }
        let r = self.read_record().transpose()?;
        self.failed = r.is_err();
        Some(r)
    }
}

/// A parsed trace of either format.
pub enum TraceStream<R: BufRead> {
    Text(TextReader<R>),
    Binary(BinaryReader<R>),
}

impl<R: BufRead> TraceStream<R> {
    pub fn header(&self) -> &TraceHeader {
        match self {
            TraceStream::Text(t) => t.header(),
            TraceStream::Binary(b) => b.header(),
        }
    }
}

impl<R: BufRead> Iterator for TraceStream<R> {
    type Item = Result<TraceRecord>;

    fn next(&mut self) -> Option<Result<TraceRecord>> {
        match self {
            TraceStream::Text(t) => t.next(),
            TraceStream::Binary(b) => b.next(),
        }
    }
}

/// Parses a trace, detecting the format from its first bytes.
pub fn read_trace<R: BufRead>(mut input: R) -> Result<TraceStream<R>> {
    let head = input.fill_buf()?;
    if head.starts_with(BINARY_MAGIC) || (head.len() < 8 && BINARY_MAGIC.starts_with(head) && !head.is_empty()) {
        Ok(TraceStream::Binary(BinaryReader::new(input)?))
    } else {
        Ok(TraceStream::Text(TextReader::new(input)?))
    }
}

pub fn open_trace(path: &Path) -> Result<TraceStream<BufReader<File>>> {
    read_trace(BufReader::with_capacity(1 << 16, File::open(path)?))
}

fn format_payload(line: &Line) -> String {
    line.iter().map(|w| format!("{w:016x}")).collect()
}

/// Writes the text form. Returns the number of records written.
pub fn write_text<W: Write>(
    mut out: W,
    header: &TraceHeader,
    records: impl IntoIterator<Item = TraceRecord>,
) -> Result<u64> {
    writeln!(
        out,
        "HYTRACE v{} cores={} data={}",
        header.version,
        header.cores,
        u8::from(header.data_bearing)
    )?;
    for l in header.description.lines() {
        writeln!(out, "# {l}")?;
    }
    let mut n = 0;
    for r in records {
        check_record(&r, header, n + 1)?;
        write!(out, "{} {} {} {:#x}", r.core, r.gap_cycles, r.op.code(), r.addr)?;
        if let Some(p) = &r.payload {
            write!(out, " {}", format_payload(p))?;
        }
        writeln!(out)?;
        n += 1;
    }
    out.flush()?;
    Ok(n)
}

/// Writes the binary form. Returns the number of records written.
pub fn write_binary<W: Write>(
    mut out: W,
    header: &TraceHeader,
    records: impl IntoIterator<Item = TraceRecord>,
) -> Result<u64> {
    out.write_all(BINARY_MAGIC)?;
    out.write_all(&header.version.to_le_bytes())?;
    out.write_all(&header.cores.to_le_bytes())?;
    out.write_all(&[u8::from(header.data_bearing)])?;
    out.write_all(&(header.description.len() as u32).to_le_bytes())?;
    out.write_all(header.description.as_bytes())?;
    let mut n = 0;
    let mut body = Vec::with_capacity(85);
    for r in records {
        check_record(&r, header, n + 1)?;
        body.clear();
        body.extend_from_slice(&r.core.to_le_bytes());
        body.extend_from_slice(&r.gap_cycles.to_le_bytes());
        body.push(match r.op {
            TraceOp::Read => 0,
            TraceOp::Write => 1,
            TraceOp::Ifetch => 2,
        });
        body.extend_from_slice(&r.addr.to_le_bytes());
        if let Some(p) = &r.payload {
            for w in p {
                body.extend_from_slice(&w.to_be_bytes());
            }
        }
        out.write_all(&(body.len() as u16).to_le_bytes())?;
        out.write_all(&body)?;
        n += 1;
    }
    out.flush()?;
    Ok(n)
}

fn check_record(r: &TraceRecord, header: &TraceHeader, n: u64) -> Result<()> {
    if r.payload.is_some() != header.data_bearing {
        return Err(malformed(n, "payload presence does not match the header"));
    }
    if r.core >= header.cores {
        return Err(malformed(n, format!("core {} outside cores={}", r.core, header.cores)));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<(TraceHeader, Vec<TraceRecord>)> {
        let t = read_trace(s.as_bytes())?;
        let h = t.header().clone();
        Ok((h, t.collect::<Result<Vec<_>>>()?))
    }

    #[test]
    fn empty_body() {
        let (h, r) = parse("HYTRACE v1 cores=2 data=0\n").unwrap();
        assert_eq!(h.cores, 2);
        assert!(r.is_empty());
    }

    #[test]
    fn data_record() {
        let payload = "00".repeat(63) + "ff";
        let (_, r) = parse(&format!("HYTRACE v1 cores=1 data=1\n0 3 W 0x1f40 {payload}\n")).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].core, 0);
        assert_eq!(r[0].gap_cycles, 3);
        assert_eq!(r[0].op, TraceOp::Write);
        assert_eq!(r[0].addr, 8000);
        assert_eq!(r[0].payload.unwrap()[7], 0xff);
    }

    #[test]
    fn payload_in_plain_trace_is_rejected() {
        let payload = "0".repeat(128);
        let e = parse(&format!("HYTRACE v1 cores=1 data=0\n# hi\n\n0 3 W 0x1f40 {payload}\n")).unwrap_err();
        assert!(matches!(e, Error::MalformedLine { line: 4, .. }), "{e:?}");
    }

    #[test]
    fn bad_headers() {
        for h in ["", "HYTRACE v2 cores=1 data=0\n", "HYTRACE v1 cores=0 data=0\n", "TRACE v1\n", "HYTRACE v1 cores=1 data=2\n"] {
            assert!(matches!(parse(h), Err(Error::BadHeader(_))), "{h:?}");
        }
    }

    #[test]
    fn malformed_records() {
        for body in ["0 1 X 0x40", "1 1 R 0x40", "0 -1 R 0x40", "0 1 R 64", "0 1 R"] {
            let e = parse(&format!("HYTRACE v1 cores=1 data=0\n{body}\n")).unwrap_err();
            assert!(matches!(e, Error::MalformedLine { line: 2, .. }), "{body}: {e:?}");
        }
    }

    #[test]
    fn description_round_trip() {
        let h = TraceHeader::new(1, false).with_description("first\nsecond");
        let rec = TraceRecord { core: 0, gap_cycles: 0, op: TraceOp::Ifetch, addr: 0x40, payload: None };
        let mut text = Vec::new();
        write_text(&mut text, &h, [rec.clone()]).unwrap();
        let (h2, r) = parse(std::str::from_utf8(&text).unwrap()).unwrap();
        assert_eq!(h2, h);
        assert_eq!(r, vec![rec.clone()]);
        let mut bin = Vec::new();
        write_binary(&mut bin, &h, [rec.clone()]).unwrap();
        let t = read_trace(&bin[..]).unwrap();
        assert_eq!(t.header(), &h);
        assert_eq!(t.collect::<Result<Vec<_>>>().unwrap(), vec![rec]);
    }

    #[test]
    fn truncated_binary() {
        let h = TraceHeader::new(1, false);
        let rec = TraceRecord { core: 0, gap_cycles: 9, op: TraceOp::Read, addr: 0x80, payload: None };
        let mut bin = Vec::new();
        write_binary(&mut bin, &h, [rec.clone(), rec]).unwrap();
        bin.truncate(bin.len() - 3);
        let r: Vec<_> = read_trace(&bin[..]).unwrap().collect();
        assert_eq!(r.len(), 2);
        assert!(r[0].is_ok());
        assert!(matches!(r[1], Err(Error::MalformedLine { line: 2, .. })));
    }
}
