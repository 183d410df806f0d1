"""File validation using magic numbers and file signatures."""

from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

# Format: {file_type: [(offset, magic_bytes, description)]}
MAGIC_NUMBERS: Dict[str, List[Tuple[int, bytes, str]]] = {
    "checkpoint": [
        (0, b"ENTITYFLOW-CHECKPOINT\n", "entityflow checkpoint"),
    ],
}

TEXT_EXTENSIONS = {".csv", ".txt", ".cfg", ".conf", ".ini"}


class FileValidator:
    """Validates checkpoint, series and config files before they are opened."""

    def __init__(self, filepath: Path):
        self.filepath = Path(filepath)

    def validate_exists(self) -> bool:
        return self.filepath.is_file()

    def validate_size(self, max_size_mb: int = 2048) -> Tuple[bool, str]:
        """
        Validate file size.

        Args:
            max_size_mb: Maximum allowed file size in MB

        Returns:
            Tuple of (is_valid, message)
        """
        if not self.filepath.exists():
            return False, "File does not exist"

        size_mb = self.filepath.stat().st_size / (1024 * 1024)
        if size_mb > max_size_mb:
            return False, f"File too large: {size_mb:.2f} MB (max: {max_size_mb} MB)"
        return True, f"File size OK: {size_mb:.2f} MB"

    def validate_readable(self) -> Tuple[bool, str]:
        try:
            with open(self.filepath, "rb") as f:
                f.read(1)
            return True, "File is readable"
        except PermissionError:
            return False, "Permission denied"
        except OSError as e:
            return False, f"Cannot read file: {e}"

    def detect_by_magic_number(self) -> Optional[str]:
        """
        Detect file type from its leading bytes.

        Returns:
            File type if a signature matches, None otherwise
        """
        try:
            with open(self.filepath, "rb") as f:
                header = f.read(512)
        except OSError:
            return None

        for file_type, signatures in MAGIC_NUMBERS.items():
            for offset, magic_bytes, _ in signatures:
                if header[offset:offset + len(magic_bytes)] == magic_bytes:
                    return file_type
        return None

    def detect_format(self) -> Optional[str]:
        """Magic number first, then a text extension; ``csv`` for text files."""
        detected = self.detect_by_magic_number()
        if detected:
            return detected
        if self.filepath.suffix.lower() in TEXT_EXTENSIONS:
            return "csv" if self.filepath.suffix.lower() == ".csv" else "text"
        return None

    def get_file_info(self) -> Dict[str, Any]:
        if not self.filepath.exists():
            return {"error": "File does not exist"}

        stat = self.filepath.stat()
        return {
            "name": self.filepath.name,
            "extension": self.filepath.suffix,
            "size_bytes": stat.st_size,
            "size_mb": stat.st_size / (1024 * 1024),
            "format": self.detect_format(),
            "is_readable": self.validate_readable()[0],
        }

    def validate_all(self, max_size_mb: int = 2048) -> Tuple[bool, List[str]]:
        """
        Run all validations.

        Returns:
            Tuple of (all_valid, list of validation messages)
        """
        messages = []
        if not self.validate_exists():
            messages.append("✗ File does not exist")
            return False, messages
        messages.append("✓ File exists")

        all_valid = True
        for valid, msg in (self.validate_size(max_size_mb), self.validate_readable()):
            messages.append(f"{'✓' if valid else '✗'} {msg}")
            all_valid = all_valid and valid

        detected = self.detect_format()
        if detected:
            messages.append(f"✓ Detected format: {detected}")
        else:
            messages.append("⚠ Could not detect format")
        return all_valid, messages


def validate_file(filepath: Path, max_size_mb: int = 2048) -> Tuple[bool, str]:
    """Quick file validation returning (is_valid, newline-joined messages)."""
    validator = FileValidator(filepath)
    all_valid, messages = validator.validate_all(max_size_mb)
    return all_valid, "\n".join(messages)
