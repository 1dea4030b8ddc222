// Default vocabulary lists for the assembly feature extractors.
// Mirrors data/vocab/*.txt; a unit test keeps the two in sync.

#include <cstddef>

namespace malfuse::detail {

extern const char* const kDefaultOpcodes[] = {
    "mov", "movzx", "movsx", "lea", "xchg", "push", "pop", "pusha", "popa", "pushf", "popf",
    "add", "adc", "sub", "sbb", "inc", "dec", "neg", "mul", "imul", "div", "idiv", "cdq",
    "cwde", "cbw", "and", "or", "xor", "not", "shl", "shr", "sal", "sar", "rol", "ror", "rcl",
    "rcr", "bt", "bts", "btr", "bswap", "cmp", "test", "jmp", "call", "ret", "retn", "retf",
    "je", "jne", "jz", "jnz", "ja", "jae", "jb", "jbe", "jg", "jge", "jl", "jle", "js", "jns",
    "jo", "jno", "jp", "jnp", "jecxz", "loop", "loope", "loopne", "leave", "enter", "int",
    "movsb", "movsw", "movsd", "stosb", "stosw", "stosd", "lodsb", "lodsw", "lodsd", "scasb",
    "scasw", "scasd", "cmpsb", "cmpsw", "cmpsd", "rep", "repe", "repne", "nop", "std",
};
extern const std::size_t kDefaultOpcodeCount = 93;

extern const char* const kDefaultApis[] = {
    "ReadFile", "WriteFile", "CloseHandle", "DuplicateHandle", "FlushFileBuffers",
    "SetEndOfFile", "SetFilePointer", "SetFilePointerEx", "GetFileSize", "GetFileSizeEx",
    "GetFileType", "GetFileTime", "SetFileTime", "FindClose", "ReadFileEx", "WriteFileEx",
    "LockFile", "UnlockFile", "CreateIoCompletionPort", "GetOverlappedResult",
    "DeviceIoControl", "CancelIo", "CreatePipe", "PeekNamedPipe", "ConnectNamedPipe",
    "DisconnectNamedPipe", "TransactNamedPipe", "SetNamedPipeHandleState", "ExitProcess",
    "TerminateProcess", "OpenProcess", "GetCurrentProcess", "GetCurrentProcessId",
    "GetExitCodeProcess", "GetProcessHeap", "GetProcessTimes", "GetProcessVersion",
    "SetPriorityClass", "GetPriorityClass", "CreateThread", "CreateRemoteThread", "OpenThread",
    "SuspendThread", "ResumeThread", "TerminateThread", "ExitThread", "GetCurrentThread",
    "GetCurrentThreadId", "GetExitCodeThread", "SetThreadPriority", "GetThreadPriority",
    "SetThreadContext", "GetThreadContext", "SwitchToThread", "TlsAlloc", "TlsFree",
    "TlsGetValue", "TlsSetValue", "QueueUserAPC", "Sleep", "SleepEx", "WaitForSingleObject",
    "WaitForSingleObjectEx", "WaitForMultipleObjects", "WaitForMultipleObjectsEx",
    "SignalObjectAndWait", "InitializeCriticalSection", "InitializeCriticalSectionAndSpinCount",
    "EnterCriticalSection", "LeaveCriticalSection", "TryEnterCriticalSection",
    "DeleteCriticalSection", "SetEvent", "ResetEvent", "PulseEvent", "ReleaseMutex",
    "ReleaseSemaphore", "InterlockedIncrement", "InterlockedDecrement", "InterlockedExchange",
    "InterlockedExchangeAdd", "InterlockedCompareExchange", "VirtualAlloc", "VirtualAllocEx",
    "VirtualFree", "VirtualFreeEx", "VirtualProtect", "VirtualProtectEx", "VirtualQuery",
    "VirtualQueryEx", "VirtualLock", "VirtualUnlock", "ReadProcessMemory", "WriteProcessMemory",
    "FlushInstructionCache", "HeapAlloc", "HeapReAlloc", "HeapFree", "HeapCreate",
    "HeapDestroy", "HeapSize", "HeapValidate", "HeapWalk", "HeapLock", "HeapUnlock",
    "HeapCompact", "GetProcessHeaps", "GlobalAlloc", "GlobalReAlloc", "GlobalFree",
    "GlobalLock", "GlobalUnlock", "GlobalSize", "GlobalHandle", "GlobalFlags", "LocalAlloc",
    "LocalReAlloc", "LocalFree", "LocalLock", "LocalUnlock", "LocalSize", "MapViewOfFile",
    "MapViewOfFileEx", "UnmapViewOfFile", "FlushViewOfFile", "GetProcAddress", "FreeLibrary",
    "FreeLibraryAndExitThread", "DisableThreadLibraryCalls", "GetModuleHandleExA",
    "GetModuleHandleExW", "GetTickCount", "GetTickCount64", "QueryPerformanceCounter",
    "QueryPerformanceFrequency", "GetSystemTime", "SetSystemTime", "GetLocalTime",
    "SetLocalTime", "GetSystemTimeAsFileTime", "SystemTimeToFileTime", "FileTimeToSystemTime",
    "FileTimeToLocalFileTime", "LocalFileTimeToFileTime", "CompareFileTime",
    "GetTimeZoneInformation", "SetTimeZoneInformation", "GetSystemInfo", "GetNativeSystemInfo",
    "GlobalMemoryStatus", "GlobalMemoryStatusEx", "GetVersion", "GetSystemMetrics",
    "GetLastError", "SetLastError", "RaiseException", "SetUnhandledExceptionFilter",
    "UnhandledExceptionFilter", "RtlUnwind", "IsBadReadPtr", "IsBadWritePtr", "IsBadCodePtr",
    "IsDebuggerPresent", "CheckRemoteDebuggerPresent", "DebugBreak", "DebugActiveProcess",
    "WideCharToMultiByte", "MultiByteToWideChar", "IsValidCodePage", "GetACP", "GetOEMCP",
    "GetCPInfo", "InterlockedFlushSList", "InitializeSListHead", "SetHandleCount",
    "GetStdHandle", "SetStdHandle", "GetCommandLineA", "GetCommandLineW", "GetStartupInfoA",
    "GetStartupInfoW", "GetEnvironmentStrings", "GetEnvironmentStringsW",
    "FreeEnvironmentStringsA", "FreeEnvironmentStringsW", "SetErrorMode", "GetErrorMode",
    "Beep", "CreateToolhelp32Snapshot", "Process32First", "Process32Next", "Process32FirstW",
    "Process32NextW", "Module32First", "Module32Next", "Thread32First", "Thread32Next",
    "Heap32ListFirst", "Heap32ListNext", "Toolhelp32ReadProcessMemory", "IsWow64Process",
    "Wow64DisableWow64FsRedirection", "Wow64RevertWow64FsRedirection", "RegCloseKey",
    "RegFlushKey", "RegNotifyChangeKeyValue", "RegOpenCurrentUser", "RegDisablePredefinedCache",
    "RegOverridePredefKey", "OpenProcessToken", "OpenThreadToken", "AdjustTokenPrivileges",
    "GetTokenInformation", "SetTokenInformation", "DuplicateToken", "DuplicateTokenEx",
    "ImpersonateSelf", "ImpersonateLoggedOnUser", "RevertToSelf", "SetThreadToken",
    "CheckTokenMembership", "AllocateAndInitializeSid", "FreeSid", "EqualSid", "GetLengthSid",
    "CopySid", "IsValidSid", "InitializeSecurityDescriptor", "SetSecurityDescriptorDacl",
    "GetSecurityDescriptorDacl", "GetKernelObjectSecurity", "SetKernelObjectSecurity",
    "CryptAcquireContextA", "CryptAcquireContextW", "CryptReleaseContext", "CryptCreateHash",
    "CryptHashData", "CryptGetHashParam", "CryptDestroyHash", "CryptGenKey", "CryptDeriveKey",
    "CryptDestroyKey", "CryptEncrypt", "CryptDecrypt", "CryptImportKey", "CryptExportKey",
    "CryptGenRandom", "CryptSignHashA", "CryptSignHashW", "CertOpenStore", "CertCloseStore",
    "CertFindCertificateInStore", "CertGetCertificateChain", "CertFreeCertificateContext",
    "CloseServiceHandle", "ControlService", "DeleteService", "EnumServicesStatusA",
    "EnumServicesStatusW", "QueryServiceConfigA", "QueryServiceConfigW", "QueryServiceStatus",
    "QueryServiceStatusEx", "SetServiceStatus", "RegisterServiceCtrlHandlerA",
    "RegisterServiceCtrlHandlerW", "StartServiceCtrlDispatcherA", "StartServiceCtrlDispatcherW",
    "LockServiceDatabase", "UnlockServiceDatabase", "NotifyBootConfigStatus", "socket",
    "connect", "bind", "listen", "accept", "send", "recv", "sendto", "recvfrom", "closesocket",
    "shutdown", "select", "ioctlsocket", "setsockopt", "getsockopt", "gethostbyname",
    "gethostbyaddr", "gethostname", "getservbyname", "getprotobyname", "inet_addr", "inet_ntoa",
    "htons", "htonl", "ntohs", "ntohl", "WSAStartup", "WSACleanup", "WSAGetLastError",
    "WSASetLastError", "WSASocketA", "WSASocketW", "WSAConnect", "WSASend", "WSARecv",
    "WSAIoctl", "WSAAsyncSelect", "WSAEventSelect", "getaddrinfo", "freeaddrinfo",
    "getnameinfo", "InternetOpenUrlA", "InternetOpenUrlW", "InternetReadFile",
    "InternetWriteFile", "InternetCloseHandle", "InternetSetOptionA", "InternetSetOptionW",
    "InternetQueryOptionA", "InternetQueryOptionW", "InternetQueryDataAvailable",
    "InternetGetConnectedState", "InternetAttemptConnect", "InternetCrackUrlA",
    "InternetCrackUrlW", "HttpAddRequestHeadersA", "HttpAddRequestHeadersW", "HttpQueryInfoA",
    "HttpQueryInfoW", "HttpEndRequestA", "HttpEndRequestW", "FtpGetFileA", "FtpGetFileW",
    "FtpPutFileA", "FtpPutFileW", "FtpOpenFileA", "FtpOpenFileW", "FtpDeleteFileA",
    "FtpDeleteFileW", "URLDownloadToFileA", "URLDownloadToFileW", "URLDownloadToCacheFileA",
    "URLDownloadToCacheFileW", "DnsQuery_A", "DnsQuery_W", "DnsFree", "NetUserAdd",
    "NetUserDel", "NetUserEnum", "NetUserGetInfo", "NetUserSetInfo", "NetLocalGroupAddMembers",
    "NetShareAdd", "NetShareEnum", "NetApiBufferFree", "GetAdaptersInfo",
    "GetAdaptersAddresses", "GetIfTable", "GetIpAddrTable", "IcmpCreateFile", "IcmpSendEcho",
    "IcmpCloseHandle", "CoInitialize", "CoInitializeEx", "CoUninitialize", "CoCreateInstance",
    "CoCreateInstanceEx", "CoCreateGuid", "CoTaskMemAlloc", "CoTaskMemFree", "CoGetClassObject",
    "CoRegisterClassObject", "OleInitialize", "OleUninitialize", "SysAllocString",
    "SysFreeString", "SysStringLen", "VariantInit", "VariantClear", "SafeArrayCreate",
    "SafeArrayDestroy", "SafeArrayGetElement", "SafeArrayPutElement", "GetForegroundWindow",
    "SetForegroundWindow", "GetDesktopWindow", "GetWindow", "EnumWindows", "EnumChildWindows",
    "EnumThreadWindows", "GetWindowThreadProcessId", "IsWindow", "IsWindowVisible",
    "ShowWindow", "SetWindowPos", "MoveWindow", "CloseWindow", "DestroyWindow", "GetClientRect",
    "GetWindowRect", "SetFocus", "GetFocus", "SetActiveWindow", "GetActiveWindow",
    "AttachThreadInput", "PostQuitMessage", "GetMessageA", "GetMessageW", "PeekMessageA",
    "PeekMessageW", "TranslateMessage", "DispatchMessageA", "DispatchMessageW",
    "DefWindowProcA", "DefWindowProcW", "RegisterClassA", "RegisterClassW", "RegisterClassExA",
    "RegisterClassExW", "SetWindowsHookExA", "SetWindowsHookExW", "UnhookWindowsHookEx",
    "CallNextHookEx", "GetAsyncKeyState", "GetKeyState", "GetKeyboardState", "SetKeyboardState",
    "keybd_event", "mouse_event", "SendInput", "MapVirtualKeyA", "MapVirtualKeyW",
    "RegisterHotKey", "UnregisterHotKey", "GetCursorPos", "SetCursorPos", "ShowCursor",
    "ClipCursor", "GetClipboardData", "SetClipboardData", "OpenClipboard", "CloseClipboard",
    "EmptyClipboard", "RegisterClipboardFormatA", "RegisterClipboardFormatW", "GetDC",
    "ReleaseDC", "BitBlt", "StretchBlt", "CreateCompatibleDC", "CreateCompatibleBitmap",
    "SelectObject", "DeleteObject", "DeleteDC", "GetDIBits", "SetDIBits", "GetDeviceCaps",
    "CreateDCA", "CreateDCW", "SHGetMalloc", "SHGetDesktopFolder", "SHBrowseForFolderA",
    "SHBrowseForFolderW", "SHGetPathFromIDListA", "SHGetPathFromIDListW", "SHFileOperationA",
    "SHFileOperationW", "SHChangeNotify", "ShellExecuteA", "ShellExecuteW", "ShellExecuteExA",
    "ShellExecuteExW", "Shell_NotifyIconA", "Shell_NotifyIconW", "ExtractIconA", "ExtractIconW",
    "DragQueryFileA", "DragQueryFileW", "DragFinish", "PathFileExistsA", "PathFileExistsW",
    "PathFindFileNameA", "PathFindFileNameW", "PathAppendA", "PathAppendW", "PathCombineA",
    "PathCombineW", "PathRemoveFileSpecA", "PathRemoveFileSpecW", "StrStrA", "StrStrW",
    "StrStrIA", "StrStrIW", "wsprintfA", "wsprintfW", "CharUpperA", "CharUpperW", "CharLowerA",
    "CharLowerW", "CharNextA", "CharNextW", "lstrcatA", "lstrcatW", "lstrcmpA", "lstrcmpW",
    "lstrcmpiA", "lstrcmpiW", "lstrcpyA", "lstrcpyW", "lstrcpynA", "lstrcpynW", "lstrlenA",
    "lstrlenW", "NtCreateFile", "NtOpenFile", "NtReadFile", "NtWriteFile", "NtClose",
    "NtCreateSection", "NtMapViewOfSection", "NtUnmapViewOfSection", "NtOpenProcess",
    "NtTerminateProcess", "NtCreateThread", "NtOpenThread", "NtSuspendThread", "NtResumeThread",
    "NtQueryInformationProcess", "NtSetInformationProcess", "NtQueryInformationThread",
    "NtQuerySystemInformation", "NtAllocateVirtualMemory", "NtFreeVirtualMemory",
    "NtProtectVirtualMemory", "NtReadVirtualMemory", "NtWriteVirtualMemory",
    "NtDuplicateObject", "NtDelayExecution", "NtQueryObject", "NtCreateKey", "NtOpenKey",
    "NtSetValueKey", "NtQueryValueKey", "NtDeleteKey", "NtEnumerateKey", "LdrLoadDll",
    "LdrGetProcedureAddress", "LdrGetDllHandle", "RtlInitUnicodeString", "RtlCreateUserThread",
    "RtlAllocateHeap", "RtlFreeHeap", "RtlZeroMemory", "RtlMoveMemory", "RtlCopyMemory",
    "RtlCompareMemory", "RtlGetVersion", "ZwClose", "ZwCreateFile", "ZwOpenProcess",
    "ZwQuerySystemInformation", "ZwAllocateVirtualMemory", "ZwWriteVirtualMemory",
    "ZwProtectVirtualMemory", "CreateProcessAsUserA", "CreateProcessAsUserW",
    "CreateProcessWithLogonW", "LogonUserA", "LogonUserW", "GetUserProfileDirectoryA",
    "GetUserProfileDirectoryW", "LoadUserProfileA", "LoadUserProfileW", "OpenEventLogA",
    "OpenEventLogW", "ClearEventLogA", "ClearEventLogW", "ReportEventA", "ReportEventW",
    "RegisterEventSourceA", "RegisterEventSourceW", "StartServiceA", "StartServiceW",
    "timeGetTime", "timeBeginPeriod", "timeEndPeriod", "waveOutOpen", "waveOutWrite",
    "PlaySoundA", "PlaySoundW", "mciSendStringA", "mciSendStringW", "EnumProcesses",
    "EnumProcessModules", "GetModuleBaseNameA", "GetModuleBaseNameW", "GetModuleFileNameExA",
    "GetModuleFileNameExW", "GetProcessImageFileNameA", "GetProcessImageFileNameW",
    "GetMappedFileNameA", "GetMappedFileNameW", "ImageNtHeader", "ImageRvaToVa", "MapAndLoad",
    "UnMapAndLoad", "CheckSumMappedFile", "SymInitialize", "SymCleanup", "SymFromAddr",
    "StackWalk64", "WinExec", "FindResourceA", "FindResourceW", "LoadResource", "LockResource",
    "SizeofResource", "FreeResource", "EnumResourceNamesA", "EnumResourceNamesW",
    "EnumResourceTypesA", "EnumResourceTypesW", "BeginUpdateResourceA", "BeginUpdateResourceW",
    "UpdateResourceA", "UpdateResourceW", "EndUpdateResourceA", "EndUpdateResourceW", "memcpy",
    "memset", "memmove", "memcmp", "malloc", "calloc", "realloc", "free", "strlen", "strcpy",
    "strncpy", "strcat", "strncat", "strcmp", "strncmp", "strchr", "strrchr", "strstr",
    "sprintf", "vsprintf", "printf", "fprintf", "fopen", "fclose", "fread", "fwrite", "fseek",
    "ftell", "fflush", "exit", "atexit", "system", "getenv", "rand", "srand", "atoi", "atol",
    "strtol", "strtoul", "CreateFileA", "CreateFileW", "DeleteFileA", "DeleteFileW",
    "CopyFileA", "CopyFileW", "CopyFileExA", "CopyFileExW", "MoveFileA", "MoveFileW",
    "MoveFileExA", "MoveFileExW", "GetFileAttributesA", "GetFileAttributesW",
    "SetFileAttributesA", "SetFileAttributesW", "GetFileAttributesExA", "GetFileAttributesExW",
    "FindFirstFileA", "FindFirstFileW", "FindNextFileA", "FindNextFileW", "FindFirstFileExA",
    "FindFirstFileExW", "CreateDirectoryA", "CreateDirectoryW", "CreateDirectoryExA",
    "CreateDirectoryExW", "RemoveDirectoryA", "RemoveDirectoryW", "GetTempPathA",
    "GetTempPathW", "GetTempFileNameA", "GetTempFileNameW", "GetFullPathNameA",
    "GetFullPathNameW", "GetLongPathNameA", "GetLongPathNameW", "GetShortPathNameA",
    "GetShortPathNameW", "SearchPathA", "SearchPathW", "GetCurrentDirectoryA",
    "GetCurrentDirectoryW", "SetCurrentDirectoryA", "SetCurrentDirectoryW",
    "GetLogicalDriveStringsA", "GetLogicalDriveStringsW", "GetDriveTypeA", "GetDriveTypeW",
    "GetDiskFreeSpaceA", "GetDiskFreeSpaceW", "GetDiskFreeSpaceExA", "GetDiskFreeSpaceExW",
    "GetVolumeInformationA", "GetVolumeInformationW", "CreateFileMappingA",
    "CreateFileMappingW", "OpenFileMappingA", "OpenFileMappingW", "CreateProcessA",
    "CreateProcessW", "CreateMutexA", "CreateMutexW", "OpenMutexA", "OpenMutexW",
    "CreateEventA", "CreateEventW", "OpenEventA", "OpenEventW", "CreateSemaphoreA",
    "CreateSemaphoreW", "OpenSemaphoreA", "OpenSemaphoreW", "CreateWaitableTimerA",
    "CreateWaitableTimerW", "LoadLibraryA", "LoadLibraryW", "LoadLibraryExA", "LoadLibraryExW",
    "GetModuleHandleA", "GetModuleHandleW", "GetModuleFileNameA", "GetModuleFileNameW",
    "GetSystemDirectoryA", "GetSystemDirectoryW", "GetWindowsDirectoryA",
    "GetWindowsDirectoryW", "GetEnvironmentVariableA", "GetEnvironmentVariableW",
    "SetEnvironmentVariableA", "SetEnvironmentVariableW", "ExpandEnvironmentStringsA",
    "ExpandEnvironmentStringsW", "GetComputerNameA", "GetComputerNameW", "SetComputerNameA",
    "SetComputerNameW", "GetUserNameA", "GetUserNameW", "GetVersionExA", "GetVersionExW",
    "GetProfileStringA", "GetProfileStringW", "WriteProfileStringA", "WriteProfileStringW",
    "GetPrivateProfileStringA", "GetPrivateProfileStringW", "WritePrivateProfileStringA",
    "WritePrivateProfileStringW", "GetPrivateProfileIntA", "GetPrivateProfileIntW",
    "OutputDebugStringA", "OutputDebugStringW", "FormatMessageA", "FormatMessageW",
    "RegOpenKeyA", "RegOpenKeyW", "RegOpenKeyExA", "RegOpenKeyExW", "RegCreateKeyA",
    "RegCreateKeyW", "RegCreateKeyExA", "RegCreateKeyExW", "RegSetValueA", "RegSetValueW",
};
extern const std::size_t kDefaultApiCount = 794;

extern const char* const kDefaultKeywords[] = {
    "kernel32", "user32", "advapi32", "ntdll", "ws2_32", "wininet", "shell32", "ole32",
    "oleaut32", "gdi32", "comctl32", "msvcrt", "urlmon", "shlwapi", "crypt32", "psapi",
    "wsock32", "winmm", "imagehlp", "mscoree", ".dll", ".exe", ".pdb", ".bat", ".tmp", ".dat",
    ".log", ".ini", ".sys", ".vbs", "offset", "dword", "word", "byte", "ptr", "short", "proc",
    "endp", "align", "assume", "public", "extrn", "segment", "ends", "import", "export",
    "library", "start", "sub_", "loc_", "unk_", "dword_", "byte_", "word_", "off_", "asc_",
    "stru_", "xref", "hinstance", "hwnd", "hkey", "hmodule", "callback", "stdcall", "cdecl",
    "fastcall", "thiscall", "varargs", "winmain", "dllmain", "http", "https", "ftp://", "www.",
    "software\\microsoft", "currentversion\\run", "system32", "syswow64", "%temp%", "appdata",
    "password", "hostname", "mutex", "inject", "payload", "decrypt", "encode", "shellcode",
    "keylog", "backdoor", "registry", "services", "autorun", "startup", "explorer",
};
extern const std::size_t kDefaultKeywordCount = 95;

}  // namespace malfuse::detail
