//! The `psz` command pipeline driven in-process on the default testbed:
//! simulate an archive, design from it, then run the ablation.

use psz::cli::run_with_args;

fn main() {
    let out = std::env::temp_dir().join("psz-cli-example");
    let out = out.to_str().expect("utf-8 temp path");
    let common = ["--out", out, "--synthetic-fr"];

    let steps: [Vec<&str>; 3] = [
        vec!["simulate-atf", "--stages", "C3"],
        vec!["design", "--atf"],
        vec!["ablate", "--stages", "C0,C1,C2,C3"],
    ];
    let atf = format!("{out}/psz_C3.atf");
    for step in steps {
        let mut args = vec!["psz"];
        args.extend(&step);
        if step[0] == "design" {
            args.push(&atf);
        }
        args.extend(common);
        println!("$ {}", args.join(" "));
        let status = run_with_args(args);
        println!("-> {status:?}\n");
    }
}
