//! Binary PGM (P5) and PBM (P4) encoding and decoding.
//!
//! Only the binary variants are supported. Header tokens may be separated by
//! any whitespace and interleaved with `#` comments; exactly one whitespace
//! byte separates the header from the raster. 16-bit PGM samples are big endian.

use crate::error::{Error, Result};
use crate::image::{HoleMask, ImageGray};

/// Decoded PGM raster with its original sample range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub samples: Vec<u16>,
}

impl Pgm {
    pub fn to_image(&self) -> Result<ImageGray> {
        ImageGray::new(
            self.width,
            self.height,
            self.samples.iter().map(|&v| v as f64).collect(),
        )
    }
}

struct Header<'a> {
    data: &'a [u8],
    pos: usize,
    format: &'static str,
}

impl<'a> Header<'a> {
    fn new(data: &'a [u8], magic: &[u8; 2], format: &'static str) -> Result<Self> {
        if data.len() < 2 || &data[..2] != magic {
            return Err(Error::format(format, "bad magic number"));
        }
        Ok(Self { data, pos: 2, format })
    }

    fn skip_space(&mut self) {
        while let Some(&c) = self.data.get(self.pos) {
            if c == b'#' {
                while let Some(&c) = self.data.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let at = self.pos;
        self.skip_space();
        if self.pos == at {
            return Err(Error::format(self.format, format!("missing separator before {what}")));
        }
        let start = self.pos;
        let mut value: usize = 0;
        while let Some(&c) = self.data.get(self.pos) {
            if !c.is_ascii_digit() {
                break;
            }
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add((c - b'0') as usize))
                .ok_or_else(|| Error::format(self.format, format!("{what} overflows")))?;
            self.pos += 1;
        }
        if self.pos == start {
            return Err(Error::format(self.format, format!("expected {what}")));
        }
        Ok(value)
    }

    /// Consumes the single whitespace byte that ends the header.
    fn raster(self) -> Result<&'a [u8]> {
        match self.data.get(self.pos) {
            Some(c) if c.is_ascii_whitespace() => Ok(&self.data[self.pos + 1..]),
            _ => Err(Error::format(self.format, "header not terminated by whitespace")),
        }
    }
}

fn dimensions(h: &mut Header<'_>) -> Result<(usize, usize, usize)> {
    let width = h.number("width")?;
    let height = h.number("height")?;
    if width == 0 || height == 0 {
        return Err(Error::format(h.format, "zero image dimension"));
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::format(h.format, "dimensions overflow"))?;
    Ok((width, height, n))
}

pub fn decode_pgm(data: &[u8]) -> Result<Pgm> {
    let mut h = Header::new(data, b"P5", "PGM")?;
    let (width, height, n) = dimensions(&mut h)?;
    let maxval = h.number("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::format("PGM", format!("maxval {maxval} outside 1..=65535")));
    }
    let raster = h.raster()?;
    let bytes_per = if maxval < 256 { 1 } else { 2 };
    let need = n
        .checked_mul(bytes_per)
        .ok_or_else(|| Error::format("PGM", "raster size overflows"))?;
    if raster.len() < need {
        return Err(Error::format(
            "PGM",
            format!("raster truncated: {} of {need} bytes", raster.len()),
        ));
    }
    let samples: Vec<u16> = if bytes_per == 1 {
        raster[..n].iter().map(|&b| b as u16).collect()
    } else {
        raster[..need]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    };
    if let Some(v) = samples.iter().find(|&&v| v as usize > maxval) {
        return Err(Error::format("PGM", format!("sample {v} exceeds maxval {maxval}")));
    }
    Ok(Pgm {
        width,
        height,
        maxval: maxval as u16,
        samples,
    })
}

pub fn encode_pgm(pgm: &Pgm) -> Result<Vec<u8>> {
    if pgm.maxval == 0 {
        return Err(Error::InvalidParameter("maxval must be positive".into()));
    }
    crate::error::check_len("PGM samples", pgm.width * pgm.height, pgm.samples.len())?;
    let mut out = format!("P5\n{} {}\n{}\n", pgm.width, pgm.height, pgm.maxval).into_bytes();
    if pgm.maxval < 256 {
        out.extend(pgm.samples.iter().map(|&v| v.min(pgm.maxval) as u8));
    } else {
        for &v in &pgm.samples {
            out.extend_from_slice(&v.min(pgm.maxval).to_be_bytes());
        }
    }
    Ok(out)
}

/// 8-bit PGM of `img`, quantized by rounding half away from zero and clamping.
pub fn encode_gray8(img: &ImageGray) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.to_u8());
    out
}

pub fn decode_pbm(data: &[u8]) -> Result<HoleMask> {
    let mut h = Header::new(data, b"P4", "PBM")?;
    let (width, height, n) = dimensions(&mut h)?;
    let raster = h.raster()?;
    let stride = width.div_ceil(8);
    let need = stride
        .checked_mul(height)
        .ok_or_else(|| Error::format("PBM", "raster size overflows"))?;
    if raster.len() < need {
        return Err(Error::format(
            "PBM",
            format!("raster truncated: {} of {need} bytes", raster.len()),
        ));
    }
    let mut flags = Vec::with_capacity(n);
    for row in raster[..need].chunks_exact(stride) {
        flags.extend((0..width).map(|x| row[x / 8] & (0x80 >> (x % 8)) != 0));
    }
    HoleMask::new(width, height, flags)
}

/// PBM with 1 (black) marking hole pixels; rows are padded to whole bytes.
pub fn encode_pbm(mask: &HoleMask) -> Vec<u8> {
    let (w, h) = (mask.width(), mask.height());
    let stride = w.div_ceil(8);
    let mut out = format!("P4\n{w} {h}\n").into_bytes();
    let body = out.len();
    out.resize(body + stride * h, 0);
    for y in 0..h {
        for x in 0..w {
            if mask.is_hole(x, y) {
                out[body + y * stride + x / 8] |= 0x80 >> (x % 8);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_header_with_comments() {
        let data = b"P5 # a comment\n# another\n3\t2\n255\n\x00\x01\x02\x03\x04\xff";
        let pgm = decode_pgm(data).unwrap();
        assert_eq!((pgm.width, pgm.height, pgm.maxval), (3, 2, 255));
        assert_eq!(pgm.samples, vec![0, 1, 2, 3, 4, 255]);
    }

    #[test]
    fn sixteen_bit_is_big_endian() {
        let data = b"P5\n2 1\n65535\n\x01\x02\xff\xfe";
        assert_eq!(decode_pgm(data).unwrap().samples, vec![0x0102, 0xfffe]);
    }

    #[test]
    fn rejects_malformed_pgm() {
        let cases: &[&[u8]] = &[
            b"",
            b"P6\n1 1\n255\n\x00",
            b"P5\n0 1\n255\n",
            b"P5\n2 2\n255\n\x00\x00",
            b"P5\n1 1\n0\n\x00",
            b"P5\n1 1\n70000\n\x00\x00",
            b"P5\n1 1\n100\n\xff",
            b"P5\n1 1\n255",
            b"P5\n1 1 255\n",
            b"P599999999999999999999999999 1\n255\n",
            b"P5\n99999999999 99999999999\n255\n",
        ];
        for c in cases {
            assert!(
                matches!(decode_pgm(c), Err(Error::Format { .. })),
                "{:?}",
                String::from_utf8_lossy(c)
            );
        }
    }

    #[test]
    fn pbm_bits_msb_first_with_padding() {
        let data = b"P4\n10 2\n\x80\x40\x00\xc0";
        let m = decode_pbm(data).unwrap();
        let holes: Vec<(usize, usize)> = (0..2)
            .flat_map(|y| (0..10).map(move |x| (x, y)))
            .filter(|&(x, y)| m.is_hole(x, y))
            .collect();
        assert_eq!(holes, vec![(0, 0), (9, 0), (8, 1), (9, 1)]);
        assert_eq!(encode_pbm(&m), data.to_vec());
    }

    #[test]
    fn gray8_quantizes() {
        let img = ImageGray::new(3, 1, vec![-3.0, 127.5, 300.0]).unwrap();
        let bytes = encode_gray8(&img);
        assert!(bytes.ends_with(&[0, 128, 255]));
        assert_eq!(decode_pgm(&bytes).unwrap().samples, vec![0, 128, 255]);
    }

    proptest! {
        #[test]
        fn pgm_round_trip(w in 1usize..20, h in 1usize..20, maxval in 1u16..=65535, seed in any::<u64>()) {
            let samples: Vec<u16> = (0..w * h)
                .map(|i| ((seed.wrapping_mul(6364136223846793005).wrapping_add((i as u64).wrapping_mul(1442695040888963407)) >> 33) % (maxval as u64 + 1)) as u16)
                .collect();
            let pgm = Pgm { width: w, height: h, maxval, samples };
            prop_assert_eq!(decode_pgm(&encode_pgm(&pgm).unwrap()).unwrap(), pgm);
        }

        #[test]
        fn pbm_round_trip(w in 1usize..40, h in 1usize..10, bits in proptest::collection::vec(any::<bool>(), 400)) {
            let mask = HoleMask::new(w, h, bits[..w * h].to_vec()).unwrap();
            prop_assert_eq!(decode_pbm(&encode_pbm(&mask)).unwrap(), mask);
        }

        #[test]
        fn decoders_never_panic(data in proptest::collection::vec(any::<u8>(), 0..64)) {
            let _ = decode_pgm(&data);
            let _ = decode_pbm(&data);
        }
    }
}
