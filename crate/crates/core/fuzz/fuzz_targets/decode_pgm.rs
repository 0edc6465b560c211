#![no_main]
use krylov_denoise::pnm::{decode_pgm, encode_pgm};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(pgm) = decode_pgm(data) {
        let bytes = encode_pgm(&pgm).unwrap();
        assert_eq!(decode_pgm(&bytes).unwrap(), pgm);
    }
});
