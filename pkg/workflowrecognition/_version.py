# Release version; bump together with docs/changelog.rst.

version = "0.1.0"


def get_versions():
    """Return the version information of the package."""

    return {'version': version, 'full-revisionid': None, 'dirty': None,
            'error': None}
