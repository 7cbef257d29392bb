#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // Any input must either parse or fail with a located error, never panic.
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(inst) = condop::InstanceFile::parse(text) {
        let _ = inst.digest();
    }
});
