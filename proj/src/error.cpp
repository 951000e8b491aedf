#include "davos/error.hpp"

namespace davos
{
    std::string_view to_string(errc code) noexcept
    {
        switch (code)
        {
            case errc::malformed_smuggle:
                return "MalformedSmuggle";
            case errc::malformed_onion:
                return "MalformedOnion";
            case errc::disallowed_flag:
                return "DisallowedFlag";
            case errc::unknown_installer:
                return "UnknownInstaller";
            case errc::location_flag_with_project:
                return "LocationFlagWithProject";
            case errc::invalid_version:
                return "InvalidVersion";
            case errc::invalid_specifier:
                return "InvalidSpecifier";
            case errc::invalid_vcs_reference:
                return "InvalidVcsReference";
            case errc::project_root_unwritable:
                return "ProjectRootUnwritable";
            case errc::empty_name:
                return "EmptyName";
            case errc::project_exists:
                return "ProjectExists";
            case errc::project_not_found:
                return "ProjectNotFound";
            case errc::project_name_too_long:
                return "ProjectNameTooLong";
            case errc::noninteractive_requires_yes:
                return "NoninteractiveRequiresYes";
            case errc::installer_not_found:
                return "InstallerNotFound";
            case errc::install_failed:
                return "InstallFailed";
            case errc::install_timeout:
                return "InstallTimeout";
            case errc::post_install_mismatch:
                return "PostInstallMismatch";
            case errc::read_only_option:
                return "ReadOnlyOption";
            case errc::invalid_value:
                return "InvalidValue";
            case errc::incompatible_options:
                return "IncompatibleOptions";
            case errc::unknown_option:
                return "UnknownOption";
            case errc::not_a_notebook:
                return "NotANotebook";
            case errc::unsupported_format_version:
                return "UnsupportedFormatVersion";
            case errc::python_version_mismatch:
                return "PythonVersionMismatch";
            case errc::io_error:
                return "IOError";
            case errc::usage:
                return "UsageError";
        }
        return "Unknown";
    }
}
