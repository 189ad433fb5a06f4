//! Parses a run configuration, dispatches it in-process and prints the
//! resulting artifact.

use polar_scf::shell::{dispatch, parse_config, render};

fn main() -> polar_scf::Result<()> {
    let cfg = parse_config(
        "command=spectrum\n\
         m=1\n\
         gamma=0.05,0.1\n\
         n=1..2\n\
         k=-1,1\n\
         format=csv\n",
    )?;
    println!("# resolved configuration\n{}", render(&cfg));
    let out = dispatch(&cfg);
    println!("# exit status {}: {}", out.status, out.report);
    print!("{}", out.artifact.unwrap_or_default());
    Ok(())
}
