#![no_main]
use krylov_denoise::scene::SceneMeta;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(meta) = SceneMeta::parse(data) {
        assert_eq!(SceneMeta::parse(&meta.to_text()).unwrap(), meta);
    }
});
