#![no_main]

use libfuzzer_sys::fuzz_target;

use condop::instance::InstanceBody;
use condop::InstanceFile;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(inst) = InstanceFile::parse(text) else {
        return;
    };
    // Large recipes would only measure the generators.
    if let InstanceBody::Recipe(_) = inst.body {
        return;
    }
    let canonical = inst.to_canonical_json();
    let back = InstanceFile::parse(&canonical).expect("canonical form re-parses");
    assert_eq!(back.to_canonical_json(), canonical);
    assert_eq!(back.digest(), inst.digest());
    let pretty = InstanceFile::parse(&inst.to_pretty_json()).expect("pretty form re-parses");
    assert_eq!(pretty.digest(), inst.digest());
});
