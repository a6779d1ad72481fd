# The version of this Python package.
ANTIHOLO_MODULI_PACKAGE_VERSION = "0.1.0"

# The version of the JSON file formats (germ families, preparations, moduli).
FILE_FORMAT_VERSION = "1"
