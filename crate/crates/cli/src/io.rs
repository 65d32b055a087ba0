//! File formats: SPMT tensors, binary PGM input and radial PSD CSV.

use std::fs;
use std::path::Path;

use image::{ColorType, ImageFormat};
use specmatch::diffusion::fmt_sig;
use specmatch::spmt::Tensor;
use specmatch::{Field64, Psd64, Tokens64};

use crate::error::{CliError, CliResult};

pub const PSD_HEADER: [&str; 3] = ["radius", "power", "count"];

pub fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn read_tensor(path: &Path) -> CliResult<Tensor> {
    Tensor::decode(&read_bytes(path)?)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

pub fn write_tensor(path: &Path, t: &Tensor) -> CliResult<()> {
    write_bytes(path, &t.encode())
}

/// 8-bit binary PGM, samples mapped to [0, 1].
pub fn decode_pgm(bytes: &[u8]) -> CliResult<Field64> {
    if !bytes.starts_with(b"P5") {
        return Err(CliError::Parse(
            "only binary PGM (P5) images are accepted".into(),
        ));
    }
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Pnm)
        .map_err(|e| CliError::Parse(format!("PGM: {e}")))?;
    if img.color() != ColorType::L8 {
        return Err(CliError::Parse(format!(
            "PGM must be 8-bit grayscale, found {:?}",
            img.color()
        )));
    }
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img
        .into_luma8()
        .into_raw()
        .into_iter()
        .map(|v| f64::from(v) / 255.0)
        .collect();
    Ok(Field64::new(1, h, w, data)?)
}

/// Reads a field from an SPMT file (dims (C,H,W) or (H,W)) or a P5 PGM.
pub fn read_field(path: &Path) -> CliResult<Field64> {
    let bytes = read_bytes(path)?;
    if bytes.starts_with(specmatch::spmt::MAGIC) {
        let t = Tensor::decode(&bytes)
            .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        return t
            .to_field()
            .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())));
    }
    decode_pgm(&bytes).map_err(|e| match e {
        CliError::Parse(m) => CliError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn write_field(path: &Path, f: &Field64) -> CliResult<()> {
    write_tensor(path, &Tensor::from_field(f))
}

/// Reads tokens from an SPMT file with dims (T,D) or (h,w,D).
pub fn read_tokens(path: &Path) -> CliResult<Tokens64> {
    read_tensor(path)?
        .to_tokens()
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

pub fn write_tokens(path: &Path, z: &Tokens64) -> CliResult<()> {
    write_tensor(path, &Tensor::from_tokens(z))
}

pub fn psd_to_csv(psd: &Psd64) -> String {
    let mut out = PSD_HEADER.join(",");
    out.push('\n');
    for ((r, p), c) in psd.radius().iter().zip(psd.power()).zip(psd.counts()) {
        out.push_str(&format!("{},{},{c}\n", fmt_sig(*r), fmt_sig(*p)));
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    write_bytes(path, text.as_bytes())
}

pub fn read_psd(path: &Path) -> CliResult<Psd64> {
    let bytes = read_bytes(path)?;
    let bad = |m: String| CliError::Parse(format!("{}: {m}", path.display()));
    let mut rdr = csv::Reader::from_reader(bytes.as_slice());
    let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != PSD_HEADER {
        return Err(bad(format!("expected header {}", PSD_HEADER.join(","))));
    }
    let (mut radius, mut power, mut counts) = (Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |k: usize| rec.get(k).map(str::trim).unwrap_or("");
        let num = |k: usize| {
            field(k)
                .parse::<f64>()
                .map_err(|e| bad(format!("row {}: {e}", i + 1)))
        };
        radius.push(num(0)?);
        power.push(num(1)?);
        counts.push(
            field(2)
                .parse::<usize>()
                .map_err(|e| bad(format!("row {}: {e}", i + 1)))?,
        );
    }
    Ok(Psd64::new(radius, power, counts)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_maps_to_unit_interval() {
        let mut bytes = b"P5\n3 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 51, 255, 102, 204, 153]);
        let f = decode_pgm(&bytes).unwrap();
        assert_eq!(f.shape(), (1, 2, 3));
        assert_eq!(f.data(), &[0.0, 0.2, 1.0, 0.4, 0.8, 0.6]);
    }

    #[test]
    fn ascii_pgm_is_rejected() {
        assert!(matches!(
            decode_pgm(b"P2\n1 1\n255\n0\n"),
            Err(CliError::Parse(_))
        ));
    }

    #[test]
    fn psd_csv_round_trip() {
        let psd = Psd64::new(
            vec![0.125, 0.25, 0.375],
            vec![4.0, 1.0, 0.444444444],
            vec![8, 16, 24],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.csv");
        write_text(&p, &psd_to_csv(&psd)).unwrap();
        let back = read_psd(&p).unwrap();
        assert_eq!(back, psd);
        assert!(psd_to_csv(&psd).starts_with("radius,power,count\n1.25000000e-1,4.00000000e0,8\n"));
    }
}
