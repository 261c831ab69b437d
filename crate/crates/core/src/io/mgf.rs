//! Reader and writer for the MGF subset used as the spectrum exchange format.
//!
//! Recognised headers inside a block are `TITLE`, `PEPMASS`, `CHARGE`,
//! `SAMPLE` and `ANALYTE`; any other `KEY=VALUE` line is ignored, as are
//! `KEY=VALUE` lines between blocks. Peak lines are `<mz> <intensity>`,
//! separated by spaces or tabs; extra columns are ignored.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::spectrum::{is_key2d, Peak, Polarity, Spectrum};

#[derive(Default)]
struct Block {
    start_line: usize,
    title: Option<String>,
    pepmass: Option<f64>,
    polarity: Polarity,
    sample: Option<String>,
    analyte: Option<String>,
    peaks: Vec<Peak>,
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Mgf {
        line,
        message: message.into(),
    }
}

/// Parses every `BEGIN IONS` .. `END IONS` block in `input`.
pub fn parse_mgf(input: &[u8]) -> Result<Vec<Spectrum>> {
    let text = std::str::from_utf8(input).map_err(|e| {
        let line = 1 + input[..e.valid_up_to()]
            .iter()
            .filter(|&&b| b == b'\n')
            .count();
        err(line, "invalid UTF-8")
    })?;

    let mut out = Vec::new();
    let mut current: Option<Block> = None;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty()
            || line.starts_with('#')
            || line.starts_with(';')
            || line.starts_with('!')
        {
            continue;
        }

        let Some(block) = current.as_mut() else {
            if line.eq_ignore_ascii_case("BEGIN IONS") {
                current = Some(Block {
                    start_line: lineno,
                    ..Block::default()
                });
            } else if !line.contains('=') {
                return Err(err(
                    lineno,
                    format!("unexpected text outside block: {line:?}"),
                ));
            }
            continue;
        };

        if line.eq_ignore_ascii_case("END IONS") {
            let block = current.take().expect("inside block");
            out.push(finish_block(block, out.len(), lineno)?);
            continue;
        }
        if line.eq_ignore_ascii_case("BEGIN IONS") {
            return Err(err(
                lineno,
                format!(
                    "block opened at line {} is not terminated",
                    block.start_line
                ),
            ));
        }

        let first = line.as_bytes()[0];
        if first.is_ascii_digit() || first == b'.' || first == b'+' || first == b'-' {
            block.peaks.push(parse_peak(line, lineno)?);
            continue;
        }

        let Some((key, value)) = line.split_once('=') else {
            return Err(err(
                lineno,
                format!("expected KEY=VALUE or peak, got {line:?}"),
            ));
        };
        let value = value.trim();
        match key.trim().to_ascii_uppercase().as_str() {
            "TITLE" => block.title = Some(value.to_string()),
            "PEPMASS" => {
                let tok = value.split_whitespace().next().unwrap_or("");
                let mz: f64 = tok
                    .parse()
                    .map_err(|_| err(lineno, format!("PEPMASS is not a number: {value:?}")))?;
                if !(mz.is_finite() && mz > 0.0) {
                    return Err(err(lineno, "PEPMASS must be positive"));
                }
                block.pepmass = Some(mz);
            }
            "CHARGE" => block.polarity = parse_charge(value, lineno)?,
            "SAMPLE" => block.sample = Some(value.to_string()),
            "ANALYTE" => {
                if !is_key2d(value) {
                    return Err(err(
                        lineno,
                        format!("ANALYTE must be 14 uppercase letters, got {value:?}"),
                    ));
                }
                block.analyte = Some(value.to_string());
            }
            _ => {}
        }
    }

    if let Some(block) = current {
        return Err(err(block.start_line, "block is not terminated by END IONS"));
    }
    Ok(out)
}

fn parse_peak(line: &str, lineno: usize) -> Result<Peak> {
    let mut toks = line.split_whitespace();
    let (Some(mz), Some(intensity)) = (toks.next(), toks.next()) else {
        return Err(err(
            lineno,
            format!("peak line needs m/z and intensity: {line:?}"),
        ));
    };
    let mz: f64 = mz
        .parse()
        .map_err(|_| err(lineno, format!("non-numeric m/z {mz:?}")))?;
    let intensity: f64 = intensity
        .parse()
        .map_err(|_| err(lineno, format!("non-numeric intensity {intensity:?}")))?;
    if !(mz.is_finite() && mz > 0.0) {
        return Err(err(lineno, format!("m/z must be positive, got {mz}")));
    }
    if !(intensity.is_finite() && intensity >= 0.0) {
        return Err(err(
            lineno,
            format!("intensity must be non-negative, got {intensity}"),
        ));
    }
    Ok(Peak::new(mz, intensity))
}

fn parse_charge(value: &str, lineno: usize) -> Result<Polarity> {
    let first = value.split([',', ' ']).next().unwrap_or("").trim();
    let negative = first.contains('-');
    let digits = first.trim_matches(|c| c == '+' || c == '-');
    let z: u32 = digits
        .parse()
        .map_err(|_| err(lineno, format!("invalid CHARGE {value:?}")))?;
    Ok(match (z, negative) {
        (0, _) => Polarity::Unknown,
        (_, true) => Polarity::Negative,
        (_, false) => Polarity::Positive,
    })
}

fn finish_block(block: Block, ordinal: usize, end_line: usize) -> Result<Spectrum> {
    let pepmass = block
        .pepmass
        .ok_or_else(|| err(block.start_line, "block has no PEPMASS"))?;
    if block.peaks.is_empty() {
        return Err(err(end_line, "block has no peaks"));
    }
    let id = block.title.unwrap_or_else(|| format!("spectrum_{ordinal}"));
    let mut s = Spectrum::new(id, pepmass, block.polarity, block.peaks)
        .map_err(|e| err(block.start_line, e.to_string()))?;
    s.sample_id = block.sample;
    s.analyte_key = block.analyte;
    Ok(s)
}

/// Writes spectra in canonical MGF. `parse_mgf(write_mgf(x))` returns `x`
/// for canonical spectra, and the text of a canonical file is reproduced
/// byte for byte.
pub fn write_mgf(spectra: &[Spectrum]) -> String {
    let mut out = String::new();
    for s in spectra {
        out.push_str("BEGIN IONS\n");
        let _ = writeln!(out, "TITLE={}", s.id);
        let _ = writeln!(out, "PEPMASS={}", s.precursor_mz);
        match s.polarity {
            Polarity::Positive => out.push_str("CHARGE=1+\n"),
            Polarity::Negative => out.push_str("CHARGE=1-\n"),
            Polarity::Unknown => {}
        }
        if let Some(sample) = &s.sample_id {
            let _ = writeln!(out, "SAMPLE={sample}");
        }
        if let Some(key) = &s.analyte_key {
            let _ = writeln!(out, "ANALYTE={key}");
        }
        for p in &s.peaks {
            let _ = writeln!(out, "{} {}", p.mz, p.intensity);
        }
        out.push_str("END IONS\n\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_basic_block() {
        let text =
            b"BEGIN IONS\nTITLE=q1\nPEPMASS=180.063\nCHARGE=1+\n60.02 100\n89.05 40\nEND IONS\n";
        let spectra = parse_mgf(text).unwrap();
        assert_eq!(spectra.len(), 1);
        let s = &spectra[0];
        assert_eq!(s.id, "q1");
        assert_eq!(s.precursor_mz, 180.063);
        assert_eq!(s.polarity, Polarity::Positive);
        assert_eq!(
            s.peaks,
            vec![Peak::new(60.02, 100.0), Peak::new(89.05, 40.0)]
        );
    }

    #[test]
    fn empty_input_is_empty_list() {
        assert!(parse_mgf(b"").unwrap().is_empty());
        assert!(parse_mgf(b"\n\n# comment\nCOM=global\n")
            .unwrap()
            .is_empty());
    }

    #[test]
    fn peaks_are_resorted() {
        let text = b"BEGIN IONS\nPEPMASS=300\n150 1\n100 2\n120\t3\nEND IONS\n";
        let s = &parse_mgf(text).unwrap()[0];
        let mzs: Vec<f64> = s.peaks.iter().map(|p| p.mz).collect();
        assert_eq!(mzs, vec![100.0, 120.0, 150.0]);
        assert_eq!(s.polarity, Polarity::Unknown);
        assert_eq!(s.id, "spectrum_0");
    }

    #[test]
    fn charge_variants() {
        assert_eq!(parse_charge("2-", 1).unwrap(), Polarity::Negative);
        assert_eq!(parse_charge("1", 1).unwrap(), Polarity::Positive);
        assert_eq!(parse_charge("+1", 1).unwrap(), Polarity::Positive);
        assert_eq!(parse_charge("0", 1).unwrap(), Polarity::Unknown);
        assert!(parse_charge("x", 1).is_err());
    }

    #[test]
    fn reports_line_numbers() {
        let missing_pepmass = b"BEGIN IONS\nTITLE=a\n100 1\nEND IONS\n";
        assert!(matches!(
            parse_mgf(missing_pepmass),
            Err(Error::Mgf { line: 1, .. })
        ));

        let bad_peak = b"BEGIN IONS\nPEPMASS=200\n100 abc\nEND IONS\n";
        assert!(matches!(
            parse_mgf(bad_peak),
            Err(Error::Mgf { line: 3, .. })
        ));

        let unterminated = b"BEGIN IONS\nPEPMASS=200\n100 1\n";
        assert!(matches!(
            parse_mgf(unterminated),
            Err(Error::Mgf { line: 1, .. })
        ));

        let nested = b"BEGIN IONS\nPEPMASS=200\nBEGIN IONS\n";
        assert!(matches!(parse_mgf(nested), Err(Error::Mgf { line: 3, .. })));

        let non_utf8 = b"BEGIN IONS\n\xff\n";
        assert!(matches!(
            parse_mgf(non_utf8),
            Err(Error::Mgf { line: 2, .. })
        ));
    }

    #[test]
    fn unknown_headers_ignored_metadata_kept() {
        let text = b"BEGIN IONS\nTITLE=x\nRTINSECONDS=12.5\nPEPMASS=250.5 1000\nSAMPLE=file_a\nANALYTE=QNAYBMKLOCPYGJ\n10 1\nEND IONS\n";
        let s = &parse_mgf(text).unwrap()[0];
        assert_eq!(s.precursor_mz, 250.5);
        assert_eq!(s.sample_id.as_deref(), Some("file_a"));
        assert_eq!(s.analyte_key.as_deref(), Some("QNAYBMKLOCPYGJ"));
        assert!(parse_mgf(b"BEGIN IONS\nPEPMASS=1\nANALYTE=short\n1 1\nEND IONS\n").is_err());
    }

    #[test]
    fn canonical_text_round_trips_bytewise() {
        let text = "BEGIN IONS\nTITLE=a\nPEPMASS=180.063\nCHARGE=1-\nSAMPLE=f1\nANALYTE=QNAYBMKLOCPYGJ\n60.02 100\n89.05 40.5\nEND IONS\n\nBEGIN IONS\nTITLE=b\nPEPMASS=99\n10 0\n11 1\nEND IONS\n\n";
        let parsed = parse_mgf(text.as_bytes()).unwrap();
        assert_eq!(write_mgf(&parsed), text);
    }
}
