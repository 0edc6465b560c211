#![no_main]
use krylov_denoise::pnm::{decode_pbm, encode_pbm};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(mask) = decode_pbm(data) {
        assert_eq!(decode_pbm(&encode_pbm(&mask)).unwrap(), mask);
    }
});
