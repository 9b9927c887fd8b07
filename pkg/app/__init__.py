__version__ = "1.0.0"

# Version of the command-line and output-file contract, bumped independently of the package
__interface_version__ = "1.0"
