//! Parse a run configuration and print it with every default filled in.
//! Pass a path to read a file instead of the built-in text.

use perforated_hj::cli::config::Driver;
use perforated_hj::cli::parse_config;

const CONFIG: &str = "
[hole]
center = [0.5, 0.5]
radius = 1/5

[model]
potential = 0.3 * cos(6.283185307179586 * x1)
m0 = 3

[data]
g = 0.5 * abs(x1 - x2)
b = 1 + 0.1 * sin(x1)

[experiment]
epsilon_list = [1/4, 1/8, 1/16]
";

fn main() {
    let text = match std::env::args().nth(1) {
        Some(p) => std::fs::read_to_string(p).expect("readable config"),
        None => CONFIG.to_string(),
    };
    match parse_config(&text) {
        Ok(cfg) => {
            print!("{}", cfg.echo());
            for d in Driver::ALL {
                let ok = cfg.check_for(d).is_ok();
                println!("# {:<10} {}", d.name(), if ok { "runnable" } else { "missing keys" });
            }
        }
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(1);
        }
    }
}
