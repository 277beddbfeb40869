"""Start the analysis service: python -m stanalyzer [flags].

Flags fall back to STAN_-prefixed environment variables, then defaults.
"""

import argparse
import os

from .api import AnalyzerService, make_server
from .config import load_config
from .phones import load_model


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="stanalyzer", description="local stuttering-therapy session analyzer"
    )
    parser.add_argument(
        "--data-dir",
        default=os.environ.get("STAN_DATA_DIR", "./stan-data"),
        help="session storage directory (default ./stan-data)",
    )
    parser.add_argument(
        "--bind",
        default=os.environ.get("STAN_BIND", "127.0.0.1:8321"),
        help="host:port to listen on (local network only)",
    )
    parser.add_argument(
        "--config",
        default=os.environ.get("STAN_CONFIG"),
        help="key = value config file with analysis thresholds",
    )
    parser.add_argument(
        "--model",
        default=os.environ.get("STAN_MODEL"),
        help="acoustic model file; omitted -> deterministic stand-in model",
    )
    parser.add_argument(
        "--static-dir",
        default=os.environ.get("STAN_STATIC_DIR"),
        help="directory with the built review UI, served under /",
    )
    args = parser.parse_args(argv)

    config = load_config(args.config)
    model = None
    if args.model:
        with open(args.model, "rb") as handle:
            model = load_model(handle.read())

    service = AnalyzerService(args.data_dir, config=config, model=model)
    server = make_server(service, bind=args.bind, static_dir=args.static_dir)
    host, port = server.server_address[:2]
    print(f"stanalyzer serving on http://{host}:{port} (data: {args.data_dir})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()


if __name__ == "__main__":
    main()
