"""
Base view class for common output formatting patterns.
"""

import csv
import json
import os

import click
import numpy as np

from kinlim import storage
from kinlim.exceptions import AcceptanceError, KinlimError

SCIENTIFIC = '.16e'


def format_number(value):
    """Floats in scientific notation with 17 significant digits; integers unchanged."""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), SCIENTIFIC)


class BaseView:
    """Base view class with common terminal and file rendering methods."""

    def __init__(self, entity_name):
        """
        Initialize base view with entity name.

        Args:
            entity_name: Name of the entity (e.g., 'Profile', 'Sweep')
        """
        self.entity_name = entity_name

    def render_start(self, message):
        click.echo(f"🚀 {message}")

    def render_file(self, path):
        """
        Announce a written artifact.

        Args:
            path: File path

        Returns:
            str: The same path
        """
        click.echo(f"📄 {path}")
        return path

    def render_warning(self, message):
        click.echo(f"⚠️  {message}")

    def render_success(self, payload, message=None):
        """
        Render a successful command summary.

        Args:
            payload: JSON-serializable summary
            message: Status line (defaults to '<Entity> completed successfully')

        Returns:
            int: Exit code 0
        """
        click.echo(f"✅ {message or f'{self.entity_name} completed successfully'}")
        click.echo(json.dumps({self.entity_name.lower(): payload, 'status': 'success'},
                              indent=2, sort_keys=True, default=storage.json_default))
        return 0

    def render_failure(self, payload, message, exit_code=AcceptanceError.exit_code):
        """Render a completed run whose checks did not pass; exits with the acceptance code by default."""
        click.echo(f"❌ {message}")
        click.echo(json.dumps({self.entity_name.lower(): payload, 'status': 'failed', 'exit_code': exit_code},
                              indent=2, sort_keys=True, default=storage.json_default))
        return exit_code

    def render_error(self, error, run_dir=None):
        """
        Render error response.

        Args:
            error: Exception raised by a service
            run_dir: When given, error.json is also written there

        Returns:
            int: Exit code (2 config, 3 numerical or internal, 4 acceptance)
        """
        if isinstance(error, KinlimError):
            exit_code = error.exit_code
            message = str(error)
        else:
            exit_code = 3
            message = f"Internal error: {error}"
        payload = {
            'error': f'{self.entity_name} Error',
            'type': type(error).__name__,
            'message': message,
            'exit_code': exit_code,
        }
        for attribute in ('cell', 'residual', 'iterations', 'step', 'dump_path'):
            value = getattr(error, attribute, None)
            if value is not None:
                payload[attribute] = value
        click.echo(f"❌ {message}", err=True)
        click.echo(json.dumps(payload, sort_keys=True, default=storage.json_default))
        if run_dir and os.path.isdir(run_dir):
            storage.write_json(os.path.join(run_dir, 'error.json'), payload)
        return exit_code

    def write_json(self, path, data):
        return self.render_file(storage.write_json(path, data))

    def write_csv(self, path, header, rows):
        """
        Write rows under a fixed header; floats are written as 17-digit scientific notation.

        Returns:
            str: The written path
        """
        with open(path, 'w', newline='', encoding='utf-8') as handle:
            writer = csv.writer(handle)
            writer.writerow(header)
            for row in rows:
                writer.writerow([v if isinstance(v, (bool, np.bool_)) or not isinstance(v, (float, int, np.number))
                                 else format_number(v) for v in row])
        return self.render_file(path)

    @staticmethod
    def read_csv(path):
        """Read a CSV written by write_csv into (header, rows of strings)."""
        with open(path, newline='', encoding='utf-8') as handle:
            reader = csv.reader(handle)
            header = next(reader)
            return header, [row for row in reader]
