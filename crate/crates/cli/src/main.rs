use clap::Parser;

fn main() {
    let cli = repwords_cli::Cli::parse();
    if let Err(e) = repwords_cli::run(cli) {
        // One machine-parsable line; the chain of causes joins with ": ".
        // Causes already embedded in their parent's message are skipped.
        let mut message = String::new();
        for cause in e.chain() {
            let text = cause.to_string();
            if message.contains(&text) {
                continue;
            }
            if !message.is_empty() {
                message.push_str(": ");
            }
            message.push_str(&text);
        }
        eprintln!("{}", serde_json::json!({ "error": message }));
        std::process::exit(1);
    }
}
