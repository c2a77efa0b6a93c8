// SPDX-License-Identifier: Apache-2.0

fn main() {
    env_logger::init();
    std::process::exit(dwcav::cli::main_with(std::env::args_os()));
}
