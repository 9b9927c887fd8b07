# CLI command routers, one module per command family
